#pragma once

#include <functional>
#include <string>
#include <vector>

#include "monosim/autodiff.hpp"
#include "monosim/tensor.hpp"

namespace monosim {

struct GradCheckFailure {
  std::size_t input_index = 0;
  std::size_t element_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  std::size_t elements_checked = 0;
  std::vector<GradCheckFailure> failures;  // capped at 16 entries
  std::string message;                     // set on non-finite intermediates
};

// Compares the recorded analytic gradient of a scalar-valued operation against
// central differences (f(x+eps) - f(x-eps)) / 2eps for every element of every
// input. `build` must be deterministic; it is re-invoked with perturbed
// constant inputs for the numeric side.
GradCheckReport finite_difference_check(
    const std::function<ag::Var(const std::vector<ag::Var>&)>& build,
    std::vector<Tensor> inputs, double epsilon, double tolerance);

}  // namespace monosim
