#include "monosim/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace monosim {

GradCheckReport finite_difference_check(
    const std::function<ag::Var(const std::vector<ag::Var>&)>& build,
    std::vector<Tensor> inputs, double epsilon, double tolerance) {
  if (epsilon <= 0.0) throw std::invalid_argument("finite_difference_check: epsilon must be > 0");

  GradCheckReport report;

  auto evaluate = [&build](const std::vector<Tensor>& tensors) {
    std::vector<ag::Var> vars;
    vars.reserve(tensors.size());
    for (const Tensor& t : tensors) vars.push_back(ag::constant(t));
    return build(vars)->scalar();
  };

  // Analytic gradients from one recorded forward/backward pass.
  std::vector<ag::Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(ag::parameter(t));
  ag::Var out = build(vars);
  if (out->value.size() != 1) {
    throw std::invalid_argument("finite_difference_check: op must produce a scalar");
  }
  if (!std::isfinite(out->scalar())) {
    report.message = "non-finite forward value";
    return report;
  }
  ag::backward(out);

  double max_rel = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k][i];
      inputs[k][i] = saved + epsilon;
      const double f_plus = evaluate(inputs);
      inputs[k][i] = saved - epsilon;
      const double f_minus = evaluate(inputs);
      inputs[k][i] = saved;

      if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
        report.message = "non-finite intermediate at input " + std::to_string(k) +
                         " element " + std::to_string(i);
        report.pass = false;
        return report;
      }

      const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
      const double analytic = vars[k]->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1.0});
      const double rel = std::abs(analytic - numeric) / denom;
      max_rel = std::max(max_rel, rel);
      ++report.elements_checked;
      if (rel > tolerance && report.failures.size() < 16) {
        report.failures.push_back({k, i, analytic, numeric, rel});
      }
    }
  }

  report.max_rel_error = max_rel;
  report.pass = report.failures.empty() && max_rel <= tolerance;
  return report;
}

}  // namespace monosim
