#include "monosim/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace monosim::ag {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

Var make_node(Tensor value, std::vector<Var> parents, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->grad = Tensor::zeros(node->value.shape());
  node->requires_grad = requires_grad;
  node->id = g_next_id.fetch_add(1);
  node->parents = std::move(parents);
  return node;
}

bool any_grad(const std::vector<Var>& parents) {
  for (const auto& p : parents) {
    if (p->requires_grad) return true;
  }
  return false;
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (!a->value.same_shape(b->value)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                shape_to_string(a->value.shape()) + " vs " +
                                shape_to_string(b->value.shape()));
  }
}

}  // namespace

Var constant(Tensor value) { return make_node(std::move(value), {}, false); }

Var parameter(Tensor value) { return make_node(std::move(value), {}, true); }

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  Var node = make_node(std::move(value), std::move(parents), true);
  node->backward = std::move(backward);
  return node;
}

void backward(const Var& root) {
  if (root->value.size() != 1) {
    throw std::invalid_argument("backward: root must be a scalar");
  }
  // Collect the reachable subgraph, then replay in reverse creation order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Var> stack{root};
  std::vector<Var> keep_alive;
  while (!stack.empty()) {
    Var v = stack.back();
    stack.pop_back();
    if (seen.count(v.get())) continue;
    seen.insert(v.get());
    keep_alive.push_back(v);
    order.push_back(v.get());
    for (const auto& p : v->parents) stack.push_back(p);
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->id > b->id; });
  root->grad[0] = 1.0;
  for (Node* node : order) {
    if (node->backward) node->backward(*node);
  }
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] + b->value[i];
  Var node = make_node(std::move(out), {a, b}, any_grad({a, b}));
  node->backward = [](Node& self) {
    for (int side = 0; side < 2; ++side) {
      Node& p = *self.parents[side];
      for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    }
  };
  return node;
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] - b->value[i];
  Var node = make_node(std::move(out), {a, b}, any_grad({a, b}));
  node->backward = [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      pa.grad[i] += self.grad[i];
      pb.grad[i] -= self.grad[i];
    }
  };
  return node;
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * b->value[i];
  Var node = make_node(std::move(out), {a, b}, any_grad({a, b}));
  node->backward = [](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      pa.grad[i] += self.grad[i] * pb.value[i];
      pb.grad[i] += self.grad[i] * pa.value[i];
    }
  };
  return node;
}

Var scale(const Var& a, double k) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * k;
  Var node = make_node(std::move(out), {a}, a->requires_grad || !a->parents.empty());
  node->backward = [k](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * k;
  };
  return node;
}

Var square(const Var& a) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] * a->value[i];
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * 2.0 * p.value[i];
    }
  };
  return node;
}

Var relu(const Var& a) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (p.value[i] > 0.0) p.grad[i] += self.grad[i];
    }
  };
  return node;
}

Var sigmoid(const Var& a) {
  Tensor out(a->value.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double s = self.value[i];
      p.grad[i] += self.grad[i] * s * (1.0 - s);
    }
  };
  return node;
}

Var sum(const Var& a) {
  double total = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) total += a->value[i];
  Var node = make_node(Tensor::scalar(total), {a}, true);
  node->backward = [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0];
  };
  return node;
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  if (Tensor::num_elements(shape) != a->value.size()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  Tensor out(std::move(shape), a->value.values());
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  };
  return node;
}

Var channels_to_rows(const Var& a) {
  require_rank(a->value, 3, "channels_to_rows");
  const std::size_t c_dim = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  Tensor out({h * w, c_dim});
  for (std::size_t c = 0; c < c_dim; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        out.at(i * w + j, c) = a->value.at(c, i, j);
      }
    }
  }
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [c_dim, h, w](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t c = 0; c < c_dim; ++c) {
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          p.grad.at(c, i, j) += self.grad.at(i * w + j, c);
        }
      }
    }
  };
  return node;
}

Var slice_rows_cols(const Var& a, std::size_t r0, std::size_t r1, std::size_t c0,
                    std::size_t c1) {
  require_rank(a->value, 2, "slice_rows_cols");
  if (r1 > a->value.dim(0) || c1 > a->value.dim(1) || r0 >= r1 || c0 >= c1) {
    throw std::invalid_argument("slice_rows_cols: bad range");
  }
  Tensor out({r1 - r0, c1 - c0});
  for (std::size_t i = r0; i < r1; ++i) {
    for (std::size_t j = c0; j < c1; ++j) out.at(i - r0, j - c0) = a->value.at(i, j);
  }
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [r0, r1, c0, c1](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = r0; i < r1; ++i) {
      for (std::size_t j = c0; j < c1; ++j) p.grad.at(i, j) += self.grad.at(i - r0, j - c0);
    }
  };
  return node;
}

Var mean_last_axis(const Var& a) {
  require_rank(a->value, 3, "mean_last_axis");
  const std::size_t c_dim = a->value.dim(0), h = a->value.dim(1), w = a->value.dim(2);
  Tensor out({c_dim, h});
  for (std::size_t c = 0; c < c_dim; ++c) {
    for (std::size_t i = 0; i < h; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < w; ++j) s += a->value.at(c, i, j);
      out.at(c, i) = s / static_cast<double>(w);
    }
  }
  Var node = make_node(std::move(out), {a}, true);
  node->backward = [c_dim, h, w](Node& self) {
    Node& p = *self.parents[0];
    const double inv = 1.0 / static_cast<double>(w);
    for (std::size_t c = 0; c < c_dim; ++c) {
      for (std::size_t i = 0; i < h; ++i) {
        double g = self.grad.at(c, i) * inv;
        for (std::size_t j = 0; j < w; ++j) p.grad.at(c, i, j) += g;
      }
    }
  };
  return node;
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, std::size_t stride,
           std::size_t padding) {
  require_rank(input->value, 3, "conv2d input");
  require_rank(weight->value, 4, "conv2d weight");
  const std::size_t c_in = input->value.dim(0), h = input->value.dim(1),
                    w = input->value.dim(2);
  const std::size_t c_out = weight->value.dim(0), kh = weight->value.dim(2),
                    kw = weight->value.dim(3);
  if (weight->value.dim(1) != c_in) {
    throw std::invalid_argument("conv2d: weight channel mismatch");
  }
  if (bias->value.size() != c_out) {
    throw std::invalid_argument("conv2d: bias size mismatch");
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (h + 2 * padding < kh || w + 2 * padding < kw) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::size_t ow = (w + 2 * padding - kw) / stride + 1;

  Tensor out({c_out, oh, ow});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = bias->value[co];
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t ki = 0; ki < kh; ++ki) {
            const std::ptrdiff_t ii =
                static_cast<std::ptrdiff_t>(i * stride + ki) - static_cast<std::ptrdiff_t>(padding);
            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kj = 0; kj < kw; ++kj) {
              const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j * stride + kj) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += input->value.at(ci, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)) *
                     weight->value.at(co, ci, ki, kj);
            }
          }
        }
        out.at(co, i, j) = acc;
      }
    }
  }

  Var node = make_node(std::move(out), {input, weight, bias}, true);
  node->backward = [c_in, h, w, c_out, kh, kw, stride, padding](Node& self) {
    Node& in = *self.parents[0];
    Node& wt = *self.parents[1];
    Node& bs = *self.parents[2];
    const std::size_t oh = self.value.dim(1), ow = self.value.dim(2);
    for (std::size_t co = 0; co < c_out; ++co) {
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          const double g = self.grad.at(co, i, j);
          if (g == 0.0) continue;
          bs.grad[co] += g;
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            for (std::size_t ki = 0; ki < kh; ++ki) {
              const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i * stride + ki) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t kj = 0; kj < kw; ++kj) {
                const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j * stride + kj) -
                                          static_cast<std::ptrdiff_t>(padding);
                if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(w)) continue;
                const auto iu = static_cast<std::size_t>(ii);
                const auto ju = static_cast<std::size_t>(jj);
                in.grad.at(ci, iu, ju) += g * wt.value.at(co, ci, ki, kj);
                wt.grad.at(co, ci, ki, kj) += g * in.value.at(ci, iu, ju);
              }
            }
          }
        }
      }
    }
  };
  return node;
}

Var batchnorm2d(const Var& input, const Var& gamma, const Var& beta,
                BatchNormState& state, bool training) {
  require_rank(input->value, 3, "batchnorm2d input");
  const std::size_t c_dim = input->value.dim(0), h = input->value.dim(1),
                    w = input->value.dim(2);
  if (gamma->value.size() != c_dim || beta->value.size() != c_dim ||
      state.running_mean.size() != c_dim) {
    throw std::invalid_argument("batchnorm2d: channel count mismatch");
  }
  const std::size_t n = h * w;
  const double eps = state.epsilon;

  Tensor mean({c_dim});
  Tensor var({c_dim});
  if (training) {
    for (std::size_t c = 0; c < c_dim; ++c) {
      double m = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) m += input->value.at(c, i, j);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          double d = input->value.at(c, i, j) - m;
          v += d * d;
        }
      v /= static_cast<double>(n);
      mean[c] = m;
      var[c] = v;
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * m;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * v;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  Tensor xhat({c_dim, h, w});
  Tensor out({c_dim, h, w});
  for (std::size_t c = 0; c < c_dim; ++c) {
    const double inv_std = 1.0 / std::sqrt(var[c] + eps);
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        double xh = (input->value.at(c, i, j) - mean[c]) * inv_std;
        xhat.at(c, i, j) = xh;
        out.at(c, i, j) = gamma->value[c] * xh + beta->value[c];
      }
    }
  }

  Var node = make_node(std::move(out), {input, gamma, beta}, true);
  auto xhat_keep = std::make_shared<Tensor>(std::move(xhat));
  auto var_keep = std::make_shared<Tensor>(std::move(var));
  node->backward = [c_dim, h, w, eps, training, xhat_keep, var_keep](Node& self) {
    Node& in = *self.parents[0];
    Node& gm = *self.parents[1];
    Node& bt = *self.parents[2];
    const std::size_t n = h * w;
    const Tensor& xh = *xhat_keep;
    for (std::size_t c = 0; c < c_dim; ++c) {
      const double inv_std = 1.0 / std::sqrt((*var_keep)[c] + eps);
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double dy = self.grad.at(c, i, j);
          sum_dy += dy;
          sum_dy_xh += dy * xh.at(c, i, j);
        }
      }
      gm.grad[c] += sum_dy_xh;
      bt.grad[c] += sum_dy;
      const double g = gm.value[c];
      if (training) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < w; ++j) {
            const double dy = self.grad.at(c, i, j);
            in.grad.at(c, i, j) +=
                g * inv_std * (dy - inv_n * sum_dy - xh.at(c, i, j) * inv_n * sum_dy_xh);
          }
        }
      } else {
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < w; ++j) {
            in.grad.at(c, i, j) += g * inv_std * self.grad.at(c, i, j);
          }
        }
      }
    }
  };
  return node;
}

Var adaptive_avg_pool(const Var& input, std::size_t out_height, std::size_t out_width) {
  require_rank(input->value, 3, "adaptive_avg_pool");
  if (out_height == 0 || out_width == 0) {
    throw std::invalid_argument("adaptive_avg_pool: output dims must be >= 1");
  }
  const std::size_t c_dim = input->value.dim(0), a = input->value.dim(1),
                    b = input->value.dim(2);
  Tensor out({c_dim, out_height, out_width});
  for (std::size_t c = 0; c < c_dim; ++c) {
    for (std::size_t i = 0; i < out_height; ++i) {
      const std::size_t r0 = (i * a) / out_height;
      const std::size_t r1 = ((i + 1) * a + out_height - 1) / out_height;
      for (std::size_t j = 0; j < out_width; ++j) {
        const std::size_t c0 = (j * b) / out_width;
        const std::size_t c1 = ((j + 1) * b + out_width - 1) / out_width;
        double s = 0.0;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t q = c0; q < c1; ++q) s += input->value.at(c, r, q);
        out.at(c, i, j) = s / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
  }
  Var node = make_node(std::move(out), {input}, true);
  node->backward = [c_dim, a, b, out_height, out_width](Node& self) {
    Node& in = *self.parents[0];
    for (std::size_t c = 0; c < c_dim; ++c) {
      for (std::size_t i = 0; i < out_height; ++i) {
        const std::size_t r0 = (i * a) / out_height;
        const std::size_t r1 = ((i + 1) * a + out_height - 1) / out_height;
        for (std::size_t j = 0; j < out_width; ++j) {
          const std::size_t c0 = (j * b) / out_width;
          const std::size_t c1 = ((j + 1) * b + out_width - 1) / out_width;
          const double g = self.grad.at(c, i, j) / static_cast<double>((r1 - r0) * (c1 - c0));
          for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t q = c0; q < c1; ++q) in.grad.at(c, r, q) += g;
        }
      }
    }
  };
  return node;
}

// --- ParameterSet -----------------------------------------------------------

Var ParameterSet::create(const std::string& name, Tensor init) {
  if (params_.count(name)) {
    throw std::invalid_argument("ParameterSet: duplicate parameter " + name);
  }
  Var p = parameter(std::move(init));
  params_[name] = p;
  return p;
}

Var ParameterSet::create_fan_in(const std::string& name, std::vector<std::size_t> shape,
                                std::size_t fan_in, Rng& rng) {
  if (fan_in == 0) throw std::invalid_argument("ParameterSet: fan_in must be > 0");
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
  return create(name, std::move(t));
}

Var ParameterSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::invalid_argument("ParameterSet: unknown parameter " + name);
  }
  return it->second;
}

void ParameterSet::zero_grads() {
  for (auto& [name, p] : params_) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] = 0.0;
  }
}

void ParameterSet::sgd_step(double learning_rate) {
  for (auto& [name, p] : params_) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value[i] -= learning_rate * p->grad[i];
    }
  }
}

std::uint64_t ParameterSet::checksum() const {
  // FNV-1a over names and raw value bytes.
  std::uint64_t hash = 1469598103934665603ull;
  auto mix = [&hash](const unsigned char* bytes, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ull;
    }
  };
  for (const auto& [name, p] : params_) {
    mix(reinterpret_cast<const unsigned char*>(name.data()), name.size());
    mix(reinterpret_cast<const unsigned char*>(p->value.data()),
        p->value.size() * sizeof(double));
  }
  return hash;
}

void ParameterSet::save(std::ostream& out) const {
  out << "params " << params_.size() << "\n";
  out.precision(17);
  for (const auto& [name, p] : params_) {
    out << name << " " << p->value.rank();
    for (std::size_t d : p->value.shape()) out << " " << d;
    out << "\n";
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      if (i) out << " ";
      out << p->value[i];
    }
    out << "\n";
  }
}

void ParameterSet::load(std::istream& in) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "params") {
    throw std::runtime_error("ParameterSet::load: bad header");
  }
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank)) throw std::runtime_error("ParameterSet::load: truncated entry");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape)
      if (!(in >> d)) throw std::runtime_error("ParameterSet::load: truncated shape");
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i)
      if (!(in >> t[i])) throw std::runtime_error("ParameterSet::load: truncated values");
    auto it = params_.find(name);
    if (it != params_.end()) {
      if (!it->second->value.same_shape(t)) {
        throw std::runtime_error("ParameterSet::load: shape mismatch for " + name);
      }
      it->second->value = std::move(t);
    } else {
      create(name, std::move(t));
    }
  }
}

}  // namespace monosim::ag
