#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qauction::core {

/// Norm tolerance for internally produced states.
inline constexpr double kNormTolerance = 1e-9;
/// Norm tolerance applied to states arriving from callers or files.
inline constexpr double kExternalNormTolerance = 1e-6;

template <class Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <class Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

/// Pure state over a finite computational basis.
template <class Real = double>
class BasicStateVector {
 public:
  using RealScalar = Real;
  using Scalar = std::complex<Real>;
  using Amplitudes = ComplexVector<Real>;

  explicit BasicStateVector(Amplitudes amps) : amps_(std::move(amps)) {
    if (amps_.size() == 0) throw std::invalid_argument("state vector needs dim >= 1");
  }

  Eigen::Index dim() const noexcept { return amps_.size(); }
  const Amplitudes& amplitudes() const noexcept { return amps_; }
  Scalar operator[](Eigen::Index i) const { return amps_(i); }

  Real norm() const { return amps_.norm(); }
  Real probability(Eigen::Index i) const { return std::norm(amps_(i)); }

  bool is_normalized(Real tol = Real(kNormTolerance)) const {
    using std::abs;
    return abs(norm() - Real(1)) <= tol;
  }

  BasicStateVector normalized() const {
    const Real n = norm();
    if (!(n > Real(0))) throw std::invalid_argument("cannot normalize the zero vector");
    return BasicStateVector(amps_ / n);
  }

  friend bool operator==(const BasicStateVector& a, const BasicStateVector& b) {
    return a.amps_.size() == b.amps_.size() && a.amps_ == b.amps_;
  }

 private:
  Amplitudes amps_;
};

using StateVector = BasicStateVector<double>;

template <class Real = double>
BasicStateVector<Real> basis_state(Eigen::Index dim, Eigen::Index index) {
  if (dim < 1) throw std::invalid_argument("basis_state: dim must be positive");
  if (index < 0 || index >= dim)
    throw std::out_of_range("basis_state: index " + std::to_string(index) +
                            " out of range for dim " + std::to_string(dim));
  ComplexVector<Real> amps = ComplexVector<Real>::Zero(dim);
  amps(index) = Real(1);
  return BasicStateVector<Real>(std::move(amps));
}

/// Normalized superposition of weighted basis states; repeated indices add.
template <class Real = double>
BasicStateVector<Real> superpose(Eigen::Index dim,
                                 const std::vector<std::pair<Eigen::Index, std::complex<Real>>>& terms) {
  if (dim < 1) throw std::invalid_argument("superpose: dim must be positive");
  ComplexVector<Real> amps = ComplexVector<Real>::Zero(dim);
  for (const auto& [index, weight] : terms) {
    if (index < 0 || index >= dim)
      throw std::out_of_range("superpose: index " + std::to_string(index) + " out of range");
    amps(index) += weight;
  }
  const Real n = amps.norm();
  if (!(n > Real(0))) throw std::invalid_argument("superpose: all weights are zero");
  return BasicStateVector<Real>(amps / n);
}

/// Kronecker product; amps[i * dim(b) + j] = a[i] * b[j].
template <class Real>
BasicStateVector<Real> tensor(const BasicStateVector<Real>& a, const BasicStateVector<Real>& b) {
  const Eigen::Index nb = b.dim();
  ComplexVector<Real> out(a.dim() * nb);
  for (Eigen::Index i = 0; i < a.dim(); ++i) out.segment(i * nb, nb) = a[i] * b.amplitudes();
  return BasicStateVector<Real>(std::move(out));
}

}  // namespace qauction::core
