#pragma once

#include <complex>
#include <stdexcept>

#include <json.hpp>

#include "qauction/core/state.hpp"

namespace qauction::core {

/// [re, im]
inline nlohmann::json complex_to_json(std::complex<double> z) { return nlohmann::json::array({z.real(), z.imag()}); }

/// Accepts [re, im] or a bare real number.
inline std::complex<double> complex_from_json(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw std::invalid_argument("expected a complex number as [re, im], got " + j.dump());
}

inline nlohmann::json state_to_json(const StateVector& psi) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < psi.dim(); ++i) out.push_back(complex_to_json(psi[i]));
  return out;
}

inline StateVector state_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("state vector must be a non-empty array of [re, im]");
  ComplexVector<double> amps(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) amps(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
  return StateVector(std::move(amps));
}

}  // namespace qauction::core
