// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/distillation.hpp"

#include <cmath>
#include <string>

#include "cowqkd/errors.hpp"

namespace cowqkd {

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParameterError("binary_entropy: p must be in [0, 1]");
  }
  if (p == 0.0 || p == 1.0) {
    return 0.0;
  }
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double eve_info_bound(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw ParameterError("eve_info_bound: visibility must be in [0, 1]");
  }
  return binary_entropy((1.0 + visibility) / 2.0);
}

double eve_info_bound_linear(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw ParameterError("eve_info_bound_linear: visibility must be in [0, 1]");
  }
  return 1.0 - visibility;
}

EveBound eve_bound_by_name(std::string_view name) {
  if (name == "entropy") {
    return eve_info_bound;
  }
  if (name == "linear") {
    return eve_info_bound_linear;
  }
  throw ParameterError("unknown Eve bound '" + std::string(name) + "'");
}

std::size_t compute_secret_length(std::size_t n, std::size_t leaked_bits, double visibility,
                                  double epsilon_pa, const EveBound& bound) {
  if (n == 0) {
    throw ParameterError("compute_secret_length: n must be positive");
  }
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw ParameterError("compute_secret_length: visibility must be in [0, 1]");
  }
  if (!(epsilon_pa > 0.0 && epsilon_pa < 1.0)) {
    throw ParameterError("compute_secret_length: epsilon_pa must be in (0, 1)");
  }
  const double eve = bound ? bound(visibility) : eve_info_bound(visibility);
  const double m = static_cast<double>(n) * (1.0 - eve) - static_cast<double>(leaked_bits) -
                   2.0 * std::log2(1.0 / epsilon_pa);
  if (!(m > 0.0)) {
    return 0;
  }
  return static_cast<std::size_t>(std::floor(m));
}

}  // namespace cowqkd
