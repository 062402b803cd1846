#pragma once

// Flat views over a model's parameters, for finite differences and tests.

#include "mimic/nn.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mimic {

template <typename Scalar, typename Module, typename Pred>
std::vector<Parameter<Scalar>*> select_parameters(Module& module, Pred&& keep) {
  std::vector<Parameter<Scalar>*> out;
  module.visit([&](Parameter<Scalar>& p) {
    if (keep(p)) out.push_back(&p);
  });
  return out;
}

template <typename Scalar>
std::vector<double> flatten_values(std::span<Parameter<Scalar>* const> params) {
  std::vector<double> out;
  for (const Parameter<Scalar>* p : params)
    for (Index i = 0; i < p->value.size(); ++i) out.push_back(static_cast<double>(p->value.data()[i]));
  return out;
}

template <typename Scalar>
std::vector<double> flatten_grads(std::span<Parameter<Scalar>* const> params) {
  std::vector<double> out;
  for (const Parameter<Scalar>* p : params)
    for (Index i = 0; i < p->grad.size(); ++i) out.push_back(static_cast<double>(p->grad.data()[i]));
  return out;
}

template <typename Scalar>
void assign_values(std::span<Parameter<Scalar>* const> params, std::span<const double> values) {
  std::size_t k = 0;
  for (Parameter<Scalar>* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      expects(k < values.size(), "assign_values: too few values");
      p->value.data()[i] = static_cast<Scalar>(values[k++]);
    }
  }
  expects(k == values.size(), "assign_values: too many values");
}

template <typename Scalar>
std::vector<std::pair<std::string, std::size_t>> parameter_groups(std::span<Parameter<Scalar>* const> params) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const Parameter<Scalar>* p : params) out.emplace_back(p->name, static_cast<std::size_t>(p->value.size()));
  return out;
}

}  // namespace mimic
