#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "pianofinger/errors.hpp"
#include "pianofinger/rng.hpp"
#include "pianofinger/tensor.hpp"

namespace pianofinger {

// One learnable tensor with its gradient slot and Adam moments.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;
  Tensor<T> v;
};

// Named parameters in creation order. Addresses are stable so tapes can hold
// leaf_ref pointers across the store's lifetime.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw ContractError("duplicate parameter " + name);
    auto p = std::make_unique<Param<T>>();
    p->name = name;
    p->value = Tensor<T>::zeros(shape);
    p->grad = Tensor<T>::zeros(shape);
    p->m = Tensor<T>::zeros(shape);
    p->v = Tensor<T>::zeros(std::move(shape));
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Param<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter " + name);
    return *params_[it->second];
  }

  const Param<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter " + name);
    return *params_[it->second];
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t count() const { return params_.size(); }
  Param<T>& operator[](std::size_t i) { return *params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.fill(T(0));
  }

  std::int64_t& step() { return step_; }
  std::int64_t step() const { return step_; }

 private:
  std::vector<std::unique_ptr<Param<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;
};

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, row-major draw order.
template <typename T>
inline void init_uniform(Tensor<T>& t, int fan_in, RngState& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace pianofinger
