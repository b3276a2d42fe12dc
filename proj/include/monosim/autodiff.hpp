#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "monosim/rng.hpp"
#include "monosim/tensor.hpp"

namespace monosim::ag {

struct Node;
using Var = std::shared_ptr<Node>;

// One recorded operation result. Gradients are accumulated by replaying the
// recorded sequence in reverse creation order; every op installs an analytic
// backward rule that scatters this node's gradient into its parents.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<Var> parents;
  std::function<void(Node&)> backward;

  double scalar() const { return value[0]; }
};

Var constant(Tensor value);
Var parameter(Tensor value);

// Records a custom op with a hand-written backward rule. The node receives a
// fresh creation id, keeping the reverse sweep topologically valid.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar root; accumulates into .grad of every
// reachable node that requires gradients.
void backward(const Var& root);

// --- elementwise / structural ops -----------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var square(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var sum(const Var& a);
Var reshape(const Var& a, std::vector<std::size_t> shape);

// C x H x W -> (H*W) x C; anchor-major view of a prediction head output.
Var channels_to_rows(const Var& a);

// Rows [r0, r1) and columns [c0, c1) of a rank-2 tensor.
Var slice_rows_cols(const Var& a, std::size_t r0, std::size_t r1, std::size_t c0,
                    std::size_t c1);

// Mean over the last axis of a rank-3 tensor (C x H x W -> C x H).
Var mean_last_axis(const Var& a);

// --- neural net ops ---------------------------------------------------------

// input C_in x H x W, weight C_out x C_in x kh x kw, bias C_out; zero padding.
Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(Tensor::zeros({channels ? channels : 1})),
        running_var(Tensor::full({channels ? channels : 1}, 1.0)) {}
};

// Per-channel normalization over the spatial extent. Training mode uses the
// current map's statistics (and updates the running ones); evaluation mode
// uses the running statistics.
Var batchnorm2d(const Var& input, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training);

Var adaptive_avg_pool(const Var& input, std::size_t out_height, std::size_t out_width);

// --- parameters --------------------------------------------------------------

// Named parameter tensors with gradient slots. Iteration order is the name
// order, so updates and checksums are deterministic.
class ParameterSet {
 public:
  Var create(const std::string& name, Tensor init);
  // Uniform in [-a, a] with a = sqrt(1 / fan_in).
  Var create_fan_in(const std::string& name, std::vector<std::size_t> shape,
                    std::size_t fan_in, Rng& rng);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  void zero_grads();
  void sgd_step(double learning_rate);
  std::uint64_t checksum() const;

  std::size_t size() const { return params_.size(); }
  const std::map<std::string, Var>& entries() const { return params_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  std::map<std::string, Var> params_;
};

}  // namespace monosim::ag
