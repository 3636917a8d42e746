#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "marflow/core/tape.hpp"

namespace marflow::flow {

// Named parameters with stable addresses (tapes keep pointers to them).
template <typename Scalar>
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor<Scalar> value, bool trainable = true) {
    params_.emplace_back(std::move(name), std::move(value), trainable);
    return params_.size() - 1;
  }
  std::size_t size() const { return params_.size(); }
  ad::Parameter<Scalar>& operator[](std::size_t i) { return params_[i]; }
  const ad::Parameter<Scalar>& operator[](std::size_t i) const { return params_[i]; }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].name == name) return i;
    }
    return std::nullopt;
  }
  Index element_count() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }
  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }
  bool all_finite() const {
    for (const auto& p : params_) {
      if (!p.value.all_finite()) return false;
    }
    return true;
  }

 private:
  std::deque<ad::Parameter<Scalar>> params_;
};

// Binds parameters to leaves of one tape, each at most once. Built from a
// mutable set, trainable parameters receive gradients; otherwise every
// parameter enters as a constant.
template <typename Scalar>
class Binding {
 public:
  Binding(ad::Tape<Scalar>& tape, ParameterSet<Scalar>& params) : tape_(&tape), params_(&params), mutable_(&params) {}
  Binding(ad::Tape<Scalar>& tape, const ParameterSet<Scalar>& params) : tape_(&tape), params_(&params) {}

  ad::Tape<Scalar>& tape() const { return *tape_; }
  const Tensor<Scalar>& value(std::size_t i) const { return (*params_)[i].value; }

  ad::Var<Scalar> operator()(std::size_t i) {
    if (vars_.size() < params_->size()) vars_.resize(params_->size());
    if (!vars_[i]) {
      if (mutable_ != nullptr && (*mutable_)[i].trainable) {
        vars_[i] = tape_->param((*mutable_)[i]);
      } else {
        vars_[i] = tape_->constant((*params_)[i].value);
      }
    }
    return *vars_[i];
  }

 private:
  ad::Tape<Scalar>* tape_;
  const ParameterSet<Scalar>* params_;
  ParameterSet<Scalar>* mutable_ = nullptr;
  std::vector<std::optional<ad::Var<Scalar>>> vars_;
};

}  // namespace marflow::flow
