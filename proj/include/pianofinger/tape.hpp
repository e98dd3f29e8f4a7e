#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pianofinger/errors.hpp"
#include "pianofinger/rng.hpp"
#include "pianofinger/tensor.hpp"

namespace pianofinger {

// Reverse-mode tape over dense tensors. Covers exactly the layer set the
// models need: matvec, elementwise arithmetic, activations, concat/slice,
// embedding row lookup, inverted dropout, and log-softmax picks.
//
// With recording off the tape is a plain forward calculator (decode paths);
// with recording on, backward(root) accumulates leaf gradients into the
// grad sinks registered at leaf creation.
template <typename T>
class Tape {
 public:
  using Var = std::int32_t;

  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var leaf(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), nullptr, nullptr, {}});
    return static_cast<Var>(nodes_.size() - 1);
  }

  // Leaf backed by external storage (parameters): no copy, gradient lands in
  // *grad_sink after backward. The pointee must outlive the tape.
  Var leaf_ref(const Tensor<T>* value, Tensor<T>* grad_sink = nullptr) {
    nodes_.push_back(Node{{}, value, grad_sink, {}});
    return static_cast<Var>(nodes_.size() - 1);
  }

  const Tensor<T>& value(Var v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v)];
    return n.external ? *n.external : n.owned;
  }

  // --- ops ------------------------------------------------------------

  Var matvec(Var w, Var x) {
    const Tensor<T>& W = value(w);
    const Tensor<T>& X = value(x);
    const int m = W.rows(), n = W.cols();
    if (static_cast<int>(X.size()) != n) throw ContractError("matvec: shape mismatch");
    Tensor<T> out = Tensor<T>::zeros({m});
    for (int r = 0; r < m; ++r) {
      const T* wrow = W.row_ptr(r);
      T acc = 0;
      for (int c = 0; c < n; ++c) acc += wrow[c] * X[c];
      out[r] = acc;
    }
    return push(std::move(out), "matvec", [this, w, x, m, n](Var self) {
      const Tensor<T>& g = grad_of(self);
      const Tensor<T>& W = value(w);
      const Tensor<T>& X = value(x);
      Tensor<T>& gw = grad_of(w);
      Tensor<T>& gx = grad_of(x);
      for (int r = 0; r < m; ++r) {
        const T gr = g[r];
        if (gr == T(0)) continue;
        T* gwrow = gw.row_ptr(r);
        const T* wrow = W.row_ptr(r);
        for (int c = 0; c < n; ++c) {
          gwrow[c] += gr * X[c];
          gx[c] += gr * wrow[c];
        }
      }
    });
  }

  Var add(Var a, Var b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B)) throw ContractError("add: shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    return push(std::move(out), "add", [this, a, b](Var self) {
      const Tensor<T>& g = grad_of(self);
      grad_of(a).add_scaled(g, T(1));
      grad_of(b).add_scaled(g, T(1));
    });
  }

  Var mul(Var a, Var b) {
    const Tensor<T>& A = value(a);
    const Tensor<T>& B = value(b);
    if (!A.same_shape(B)) throw ContractError("mul: shape mismatch");
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    return push(std::move(out), "mul", [this, a, b](Var self) {
      const Tensor<T>& g = grad_of(self);
      const Tensor<T>& A = value(a);
      const Tensor<T>& B = value(b);
      Tensor<T>& ga = grad_of(a);
      Tensor<T>& gb = grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * B[i];
        gb[i] += g[i] * A[i];
      }
    });
  }

  Var sigmoid(Var a) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    return push(std::move(out), "sigmoid", [this, a](Var self) {
      const Tensor<T>& g = grad_of(self);
      const Tensor<T>& y = value(self);
      Tensor<T>& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }

  Var tanh_op(Var a) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v = std::tanh(v);
    return push(std::move(out), "tanh", [this, a](Var self) {
      const Tensor<T>& g = grad_of(self);
      const Tensor<T>& y = value(self);
      Tensor<T>& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
    });
  }

  Var relu(Var a) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return push(std::move(out), "relu", [this, a](Var self) {
      const Tensor<T>& g = grad_of(self);
      const Tensor<T>& x = value(a);
      Tensor<T>& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] > T(0)) ga[i] += g[i];
      }
    });
  }

  Var concat(std::span<const Var> parts) {
    std::size_t total = 0;
    for (Var p : parts) total += value(p).size();
    Tensor<T> out = Tensor<T>::zeros({static_cast<int>(total)});
    std::size_t at = 0;
    for (Var p : parts) {
      const Tensor<T>& v = value(p);
      std::copy(v.data.begin(), v.data.end(), out.data.begin() + at);
      at += v.size();
    }
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out), "concat", [this, owned](Var self) {
      const Tensor<T>& g = grad_of(self);
      std::size_t at = 0;
      for (Var p : owned) {
        Tensor<T>& gp = grad_of(p);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[at + i];
        at += gp.size();
      }
    });
  }

  Var concat2(Var a, Var b) {
    const Var parts[2] = {a, b};
    return concat(std::span<const Var>(parts, 2));
  }

  Var slice(Var a, int offset, int len) {
    const Tensor<T>& A = value(a);
    if (offset + len > static_cast<int>(A.size())) throw ContractError("slice: out of range");
    Tensor<T> out = Tensor<T>::zeros({len});
    std::copy(A.data.begin() + offset, A.data.begin() + offset + len, out.data.begin());
    return push(std::move(out), "slice", [this, a, offset, len](Var self) {
      const Tensor<T>& g = grad_of(self);
      Tensor<T>& ga = grad_of(a);
      for (int i = 0; i < len; ++i) ga[offset + i] += g[i];
    });
  }

  // Embedding lookup: one row of a 2-D table.
  Var row(Var table, int r) {
    const Tensor<T>& tab = value(table);
    if (r < 0 || r >= tab.rows()) throw ContractError("row: index out of table range");
    const int width = tab.cols();
    Tensor<T> out = Tensor<T>::zeros({width});
    std::copy(tab.row_ptr(r), tab.row_ptr(r) + width, out.data.begin());
    return push(std::move(out), "row", [this, table, r, width](Var self) {
      const Tensor<T>& g = grad_of(self);
      T* grow = grad_of(table).row_ptr(r);
      for (int i = 0; i < width; ++i) grow[i] += g[i];
    });
  }

  // Inverted dropout: identity at eval or rate 0, otherwise keep with
  // probability 1-rate and scale kept units by 1/(1-rate).
  Var dropout(Var a, T rate, RngState& rng, bool train) {
    if (!train || rate == T(0)) return a;
    const Tensor<T>& A = value(a);
    const T scale = T(1) / (T(1) - rate);
    std::vector<T> mask(A.size());
    for (auto& m : mask) m = rng.uniform() < static_cast<double>(rate) ? T(0) : scale;
    Tensor<T> out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return push(std::move(out), "dropout", [this, a, mask = std::move(mask)](Var self) {
      const Tensor<T>& g = grad_of(self);
      Tensor<T>& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
    });
  }

  // log softmax(logits)[label], max-subtracted for stability. The full
  // probability vector is written to *probs_out when given (sampling, beams).
  Var log_prob(Var logits, int label, Tensor<T>* probs_out = nullptr) {
    const Tensor<T>& L = value(logits);
    const int n = static_cast<int>(L.size());
    if (label < 0 || label >= n) throw ContractError("log_prob: label out of range");
    T maxv = L[0];
    for (int i = 1; i < n; ++i) maxv = std::max(maxv, L[i]);
    T sum = 0;
    Tensor<T> probs = Tensor<T>::zeros({n});
    for (int i = 0; i < n; ++i) {
      probs[i] = std::exp(L[i] - maxv);
      sum += probs[i];
    }
    for (int i = 0; i < n; ++i) probs[i] /= sum;
    if (probs_out) *probs_out = probs;
    Tensor<T> out = Tensor<T>::zeros({1});
    out[0] = L[label] - maxv - std::log(sum);
    return push(std::move(out), "log_prob",
                [this, logits, label, probs = std::move(probs)](Var self) {
                  const T g = grad_of(self)[0];
                  Tensor<T>& gl = grad_of(logits);
                  for (std::size_t i = 0; i < gl.size(); ++i) {
                    gl[i] += g * ((static_cast<int>(i) == label ? T(1) : T(0)) - probs[i]);
                  }
                });
  }

  Var scale(Var a, T c) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v *= c;
    return push(std::move(out), "scale", [this, a, c](Var self) {
      grad_of(a).add_scaled(grad_of(self), c);
    });
  }

  // Scalar combination sum_i coeffs[i] * scalars[i].
  Var weighted_sum(std::span<const Var> scalars, std::span<const T> coeffs) {
    if (scalars.size() != coeffs.size()) throw ContractError("weighted_sum: size mismatch");
    Tensor<T> out = Tensor<T>::zeros({1});
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      const Tensor<T>& v = value(scalars[i]);
      if (v.size() != 1) throw ContractError("weighted_sum: non-scalar input");
      out[0] += coeffs[i] * v[0];
    }
    std::vector<Var> vars(scalars.begin(), scalars.end());
    std::vector<T> cs(coeffs.begin(), coeffs.end());
    return push(std::move(out), "weighted_sum", [this, vars, cs](Var self) {
      const T g = grad_of(self)[0];
      for (std::size_t i = 0; i < vars.size(); ++i) grad_of(vars[i])[0] += g * cs[i];
    });
  }

  Var add_scalars(Var a, Var b, T cb = T(1)) {
    const Var vars[2] = {a, b};
    const T cs[2] = {T(1), cb};
    return weighted_sum(std::span<const Var>(vars, 2), std::span<const T>(cs, 2));
  }

  // --- backward ---------------------------------------------------------

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. May be called
  // once; leaf gradients are accumulated into their registered sinks.
  void backward(Var root) {
    if (!recording_) throw ContractError("backward on a non-recording tape");
    if (ran_backward_) throw ContractError("backward ran twice on one tape");
    if (value(root).size() != 1) throw ContractError("backward root must be scalar");
    ran_backward_ = true;
    grads_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      grads_[i] = Tensor<T>::zeros(value(static_cast<Var>(i)).shape);
    }
    grads_[static_cast<std::size_t>(root)][0] = T(1);
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].back) nodes_[i].back(static_cast<Var>(i));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].grad_sink) nodes_[i].grad_sink->add_scaled(grads_[i], T(1));
    }
  }

  // Gradient of a node after backward (tests / diagnostics).
  const Tensor<T>& gradient(Var v) const { return grads_[static_cast<std::size_t>(v)]; }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    Tensor<T>* grad_sink = nullptr;
    std::function<void(Var)> back;
  };

  Tensor<T>& grad_of(Var v) { return grads_[static_cast<std::size_t>(v)]; }

  template <typename F>
  Var push(Tensor<T>&& out, const char* op, F&& back) {
    check_finite(out, op);
    Node node;
    node.owned = std::move(out);
    if (recording_) node.back = std::forward<F>(back);
    nodes_.push_back(std::move(node));
    return static_cast<Var>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  bool recording_;
  bool ran_backward_ = false;
};

}  // namespace pianofinger
