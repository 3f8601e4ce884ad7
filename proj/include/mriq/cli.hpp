#pragma once

namespace mriq::cli {

/// Dispatches the subcommands (synth, train, eval, agreement, activations,
/// suspects, gradcheck). Returns the process exit code: 0 on success, 1 on
/// runtime failure, 2 on usage errors. Progress goes to stderr; machine
/// output goes only to the declared files or stdout.
int run(int argc, const char* const* argv);

}  // namespace mriq::cli
