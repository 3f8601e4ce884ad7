#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mriq/nn.hpp"

namespace mriq::nn {

/// Result of one finite-difference suite entry. `skipped` counts coordinates
/// where the numeric estimate itself is invalid and no comparison is made:
/// either the +-h probes landed in different ReLU linear regions (a central
/// difference across a kink estimates nothing), or a half-step re-estimate
/// disagreed with the full-step one (curvature too strong for the step, as
/// batchnorm over a tiny population produces). A pass requires every
/// compared coordinate within the bound AND skips below 10% of comparisons.
struct GradCheckReport {
  std::string name;
  int draws = 0;
  double max_rel_err = 0;
  bool pass = false;
  long checked = 0;
  long skipped = 0;
};

struct NetGradResult {
  double max_rel_err = 0;
  long checked = 0;
  long skipped = 0;
};

/// Central-difference check of every trainable parameter gradient of a
/// double-precision network against its analytic backward pass. Coordinates
/// whose probes disagree on any ReLU activation sign, or whose half-step
/// re-estimate brands the numeric derivative untrustworthy, are skipped and
/// counted; everywhere else the estimate is valid and compared.
NetGradResult check_network_gradients(Network<double>& net,
                                      const Tensor4d& batch,
                                      const std::vector<int>& labels,
                                      double h);

/// Runs the whole suite: conv, batchnorm (train mode), dense, softmax
/// cross-entropy, and both full architectures at 16x16 input, each over at
/// least 20 random parameter/input draws, all in double precision with
/// h = 1e-3 and a pass bound of 1e-4 relative error.
std::vector<GradCheckReport> run_gradient_checks(uint64_t seed);

/// True when every entry passed.
bool all_passed(const std::vector<GradCheckReport>& reports);

}  // namespace mriq::nn
