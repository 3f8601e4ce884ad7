#include "mriq/cli.hpp"

int main(int argc, char** argv) { return mriq::cli::run(argc, argv); }
