#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flowseg {

struct GradcheckOptions {
  std::size_t instances = 20;
  std::size_t size = 8;
  std::uint64_t seed = 0;
  double step = 1e-4;
  double loss_tolerance = 1e-4;
  double network_tolerance = 1e-3;
  double adjoint_tolerance = 1e-12;
};

/// Errors are max |analytic - numeric| over max(|analytic|, |numeric|),
/// taken per instance and then maximized over instances.
struct GradcheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::size_t instances = 0;
  std::size_t coordinates = 0;

  bool passed() const { return max_error <= tolerance; }
};

/// Capacity gradients of the training loss for both flow-loss forms and
/// both energy references, flows held fixed.
GradcheckResult check_loss_gradients(const GradcheckOptions& options);

/// Parameter gradients of a one-block network with widths {2, 2} through
/// the capacity head and training loss, flows held fixed.
GradcheckResult check_network_gradients(const GradcheckOptions& options);

/// |<grad u, p> + <u, div p>| on random fields (absolute).
GradcheckResult check_adjoint(const GradcheckOptions& options);

std::vector<GradcheckResult> run_gradchecks(const GradcheckOptions& options);

}  // namespace flowseg
