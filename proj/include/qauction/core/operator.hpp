#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qauction/core/state.hpp"

namespace qauction::core {

inline constexpr double kUnitaryTolerance = 1e-9;
inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kAntiHermitianTolerance = 1e-10;

/// max |M^dagger M - I|
template <class Derived>
typename Derived::RealScalar unitarity_defect(const Eigen::MatrixBase<Derived>& m) {
  using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix gram = m.adjoint() * m;
  return (gram - Matrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
}

/// max |M - M^dagger|
template <class Derived>
typename Derived::RealScalar hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// max |M + M^dagger|
template <class Derived>
typename Derived::RealScalar antihermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.adjoint()).cwiseAbs().maxCoeff();
}

/// Square operator on a finite basis, stored dense or diagonal.
///
/// The unitary and hermitian flags are only set by the checked factories,
/// so a flagged operator always satisfies the corresponding bound.
template <class Real = double>
class BasicOperator {
 public:
  using Scalar = std::complex<Real>;
  using Matrix = ComplexMatrix<Real>;
  using Vector = ComplexVector<Real>;
  enum class Kind { Dense, Diagonal };

  static BasicOperator dense(Matrix m) {
    if (m.rows() != m.cols() || m.rows() == 0)
      throw std::invalid_argument("operator must be square with dim >= 1");
    return BasicOperator(Kind::Dense, std::move(m), Vector());
  }

  static BasicOperator diagonal(Vector d) {
    if (d.size() == 0) throw std::invalid_argument("operator must have dim >= 1");
    return BasicOperator(Kind::Diagonal, Matrix(), std::move(d));
  }

  static BasicOperator identity(Eigen::Index dim) {
    auto op = diagonal(Vector::Ones(dim));
    op.unitary_ = op.hermitian_ = true;
    return op;
  }

  static BasicOperator unitary(Matrix m, Real tol = Real(kUnitaryTolerance)) {
    auto op = dense(std::move(m));
    op.require_unitary(tol);
    return op;
  }

  static BasicOperator unitary_diagonal(Vector d, Real tol = Real(kUnitaryTolerance)) {
    auto op = diagonal(std::move(d));
    op.require_unitary(tol);
    return op;
  }

  static BasicOperator hermitian(Matrix m, Real tol = Real(kHermitianTolerance)) {
    auto op = dense(std::move(m));
    op.require_hermitian(tol);
    return op;
  }

  static BasicOperator hermitian_diagonal(Vector d, Real tol = Real(kHermitianTolerance)) {
    auto op = diagonal(std::move(d));
    op.require_hermitian(tol);
    return op;
  }

  Eigen::Index dim() const noexcept { return kind_ == Kind::Dense ? dense_.rows() : diag_.size(); }
  Kind kind() const noexcept { return kind_; }
  bool is_unitary() const noexcept { return unitary_; }
  bool is_hermitian() const noexcept { return hermitian_; }

  /// Diagonal entries; only valid for Kind::Diagonal.
  const Vector& diagonal_entries() const {
    if (kind_ != Kind::Diagonal) throw std::logic_error("operator is not diagonal");
    return diag_;
  }

  Matrix to_dense() const {
    if (kind_ == Kind::Dense) return dense_;
    return diag_.asDiagonal();
  }

  Scalar entry(Eigen::Index row, Eigen::Index col) const {
    if (kind_ == Kind::Dense) return dense_(row, col);
    return row == col ? diag_(row) : Scalar(0);
  }

  BasicOperator adjoint() const {
    BasicOperator out = kind_ == Kind::Dense ? dense(dense_.adjoint()) : diagonal(diag_.conjugate());
    out.unitary_ = unitary_;
    out.hermitian_ = hermitian_;
    return out;
  }

  Vector apply_to(const Vector& v) const {
    if (v.size() != dim())
      throw std::invalid_argument("dimension mismatch: operator " + std::to_string(dim()) +
                                  " vs state " + std::to_string(v.size()));
    if (kind_ == Kind::Dense) return dense_ * v;
    return diag_.cwiseProduct(v);
  }

  friend BasicOperator operator*(const BasicOperator& a, const BasicOperator& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch in operator product");
    BasicOperator out = (a.kind_ == Kind::Diagonal && b.kind_ == Kind::Diagonal)
                            ? diagonal(a.diag_.cwiseProduct(b.diag_))
                            : dense(a.to_dense() * b.to_dense());
    out.unitary_ = a.unitary_ && b.unitary_;
    return out;
  }

 private:
  BasicOperator(Kind kind, Matrix m, Vector d) : kind_(kind), dense_(std::move(m)), diag_(std::move(d)) {}

  void require_unitary(Real tol) {
    const Real defect = kind_ == Kind::Dense
                            ? unitarity_defect(dense_)
                            : (diag_.cwiseAbs2().array() - Real(1)).abs().maxCoeff();
    if (!(defect <= tol))
      throw std::domain_error("operator is not unitary (defect " + std::to_string(defect) + ")");
    unitary_ = true;
  }

  void require_hermitian(Real tol) {
    const Real defect = kind_ == Kind::Dense ? hermiticity_defect(dense_)
                                             : diag_.imag().cwiseAbs().maxCoeff() * Real(2);
    if (!(defect <= tol))
      throw std::domain_error("operator is not hermitian (defect " + std::to_string(defect) + ")");
    hermitian_ = true;
  }

  Kind kind_;
  Matrix dense_;
  Vector diag_;
  bool unitary_ = false;
  bool hermitian_ = false;
};

using Operator = BasicOperator<double>;

/// op * psi. Unitary operators keep normalized states normalized.
template <class Real>
BasicStateVector<Real> apply(const BasicOperator<Real>& op, const BasicStateVector<Real>& psi) {
  return BasicStateVector<Real>(op.apply_to(psi.amplitudes()));
}

template <class Real>
BasicStateVector<Real> operator*(const BasicOperator<Real>& op, const BasicStateVector<Real>& psi) {
  return apply(op, psi);
}

/// Kronecker product of operators; a acts on the more significant index.
template <class Real>
BasicOperator<Real> kron(const BasicOperator<Real>& a, const BasicOperator<Real>& b) {
  using Op = BasicOperator<Real>;
  const Eigen::Index na = a.dim(), nb = b.dim();
  if (a.kind() == Op::Kind::Diagonal && b.kind() == Op::Kind::Diagonal) {
    typename Op::Vector d(na * nb);
    for (Eigen::Index i = 0; i < na; ++i) d.segment(i * nb, nb) = a.diagonal_entries()(i) * b.diagonal_entries();
    if (a.is_unitary() && b.is_unitary()) return Op::unitary_diagonal(std::move(d), Real(1e-8));
    return Op::diagonal(std::move(d));
  }
  const auto da = a.to_dense();
  const auto db = b.to_dense();
  typename Op::Matrix m(na * nb, na * nb);
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index j = 0; j < na; ++j) m.block(i * nb, j * nb, nb, nb) = da(i, j) * db;
  if (a.is_unitary() && b.is_unitary()) return Op::unitary(std::move(m), Real(1e-8));
  return Op::dense(std::move(m));
}

/// Applies f_0 (x) f_1 (x) ... (x) f_{k-1} to psi without forming the product.
template <class Real>
BasicStateVector<Real> apply_tensor_product(const std::vector<BasicOperator<Real>>& factors,
                                            const BasicStateVector<Real>& psi) {
  Eigen::Index total = 1;
  for (const auto& f : factors) total *= f.dim();
  if (factors.empty() || total != psi.dim())
    throw std::invalid_argument("dimension mismatch in tensor-product application");

  ComplexVector<Real> amps = psi.amplitudes();
  ComplexVector<Real> scratch(total);
  Eigen::Index outer = 1;
  for (const auto& f : factors) {
    const Eigen::Index d = f.dim();
    const Eigen::Index inner = total / (outer * d);
    const auto m = f.to_dense();
    // View amps as [outer][d][inner] and contract the middle index with f.
    for (Eigen::Index o = 0; o < outer; ++o) {
      Eigen::Map<const ComplexMatrix<Real>> block(amps.data() + o * d * inner, inner, d);
      Eigen::Map<ComplexMatrix<Real>> dest(scratch.data() + o * d * inner, inner, d);
      dest.noalias() = block * m.transpose();
    }
    amps.swap(scratch);
    outer *= d;
  }
  return BasicStateVector<Real>(std::move(amps));
}

/// <psi|h|psi> / <psi|psi> for a hermitian-flagged h.
template <class Real>
Real expectation(const BasicOperator<Real>& h, const BasicStateVector<Real>& psi) {
  if (!h.is_hermitian()) throw std::domain_error("expectation requires a hermitian operator");
  const auto hv = h.apply_to(psi.amplitudes());
  const std::complex<Real> num = psi.amplitudes().dot(hv);
  const Real den = psi.amplitudes().squaredNorm();
  if (!(den > Real(0))) throw std::invalid_argument("expectation of the zero vector");
  return num.real() / den;
}

/// exp(g) for anti-hermitian g, via the eigendecomposition of the hermitian i*g.
template <class Real>
BasicOperator<Real> exp_antihermitian(const BasicOperator<Real>& g) {
  using Op = BasicOperator<Real>;
  using C = std::complex<Real>;
  const C i_unit(Real(0), Real(1));
  if (g.kind() == Op::Kind::Diagonal) {
    const auto& d = g.diagonal_entries();
    const Real defect = Real(2) * d.real().cwiseAbs().maxCoeff();
    if (!(defect <= Real(kAntiHermitianTolerance)))
      throw std::domain_error("exp_antihermitian: generator is not anti-hermitian");
    typename Op::Vector e(d.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) e(k) = std::polar(Real(1), d(k).imag());
    return Op::unitary_diagonal(std::move(e));
  }
  const auto m = g.to_dense();
  const Real defect = antihermiticity_defect(m);
  if (!(defect <= Real(kAntiHermitianTolerance)))
    throw std::domain_error("exp_antihermitian: generator is not anti-hermitian (defect " +
                            std::to_string(defect) + ")");
  // g = -i H with H = i g hermitian; symmetrize to remove rounding asymmetry.
  typename Op::Matrix h = i_unit * m;
  h = (h + h.adjoint().eval()) * Real(0.5);
  Eigen::SelfAdjointEigenSolver<typename Op::Matrix> solver(h);
  if (solver.info() != Eigen::Success) throw std::runtime_error("exp_antihermitian: eigensolver failed");
  const auto& lambda = solver.eigenvalues();
  typename Op::Vector phases(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) phases(k) = std::polar(Real(1), -lambda(k));
  const auto& v = solver.eigenvectors();
  typename Op::Matrix u = v * phases.asDiagonal() * v.adjoint();
  return Op::unitary(std::move(u));
}

}  // namespace qauction::core
