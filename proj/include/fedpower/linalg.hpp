#pragma once

// Dense kernels for the power-iteration family: orthonormalization, a
// reference SVD, Gram matrices, subspace distances and the two basis
// alignment rules (orthogonal Procrustes and sign fixing).
//
// Everything here is a free function template over Eigen expressions, so
// blocks, maps and products can be passed without materializing copies.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "fedpower/error.hpp"

namespace fedpower {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

namespace tol {
inline constexpr double orthonormal = 1e-10;
/// Relative pivot threshold below which a QR factor is declared singular.
inline constexpr double rank = 1e-12;
}  // namespace tol

/// What `orth` does with a numerically rank-deficient input.
///   strict   - throw RankDeficient
///   complete - keep the Householder Q; columns beyond the numerical rank
///              are a deterministic orthonormal completion
enum class RankPolicy { strict, complete };

/// Alignment rule applied to a worker basis before aggregation.
enum class Alignment { none, opt, sign_fix };

namespace detail {

inline std::string shape(Index rows, Index cols) {
  std::ostringstream os;
  os << rows << "x" << cols;
  return os.str();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.derived().array().isFinite().all();
}

template <typename Derived>
typename Derived::RealScalar max_abs(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0;
  return a.cwiseAbs().maxCoeff();
}

/// Replace columns of `q` that are (numerically) zero with unit vectors
/// orthogonal to every other column. Columns that are already fine are
/// left untouched.
template <typename Scalar>
void complete_columns(MatrixX<Scalar>& q) {
  const Index d = q.rows();
  for (Index j = 0; j < q.cols(); ++j) {
    if (q.col(j).norm() > Scalar(0.5)) continue;
    for (Index e = 0; e < d; ++e) {
      VectorX<Scalar> cand = VectorX<Scalar>::Unit(d, e);
      for (int pass = 0; pass < 2; ++pass) {
        for (Index l = 0; l < q.cols(); ++l) {
          if (l == j || q.col(l).norm() <= Scalar(0.5)) continue;
          cand -= q.col(l).dot(cand) * q.col(l);
        }
      }
      const Scalar nrm = cand.norm();
      if (nrm > Scalar(0.5)) {
        q.col(j) = cand / nrm;
        break;
      }
    }
  }
}

}  // namespace detail

/// A d x r matrix with orthonormal columns. Construction checks
/// ||Q^T Q - I||_max against the tolerance; `orth` and the SVD produce
/// these directly.
template <typename Scalar>
class BasicOrthonormalBasis {
 public:
  using MatrixType = MatrixX<Scalar>;

  static BasicOrthonormalBasis adopt(MatrixType q,
                                     double tolerance = tol::orthonormal) {
    if (q.cols() > q.rows()) {
      throw DimensionMismatch("orthonormal basis cannot have more columns than rows: " +
                              detail::shape(q.rows(), q.cols()));
    }
    const double err = orthonormality_error(q);
    if (!(err <= tolerance)) {
      std::ostringstream os;
      os << "columns are not orthonormal: max |Q^T Q - I| = " << err
         << " > " << tolerance;
      throw NotOrthonormal(os.str());
    }
    return BasicOrthonormalBasis(std::move(q), tolerance);
  }

  /// Caller guarantees orthonormality (e.g. a Householder Q factor).
  static BasicOrthonormalBasis adopt_unchecked(MatrixType q,
                                               double tolerance = tol::orthonormal) {
    return BasicOrthonormalBasis(std::move(q), tolerance);
  }

  /// First r columns of the d x d identity.
  static BasicOrthonormalBasis canonical(Index d, Index r) {
    return adopt(MatrixType::Identity(d, r));
  }

  static double orthonormality_error(const MatrixType& q) {
    if (q.cols() == 0) return 0.0;
    const MatrixType g = q.transpose() * q;
    return static_cast<double>(
        (g - MatrixType::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff());
  }

  const MatrixType& matrix() const noexcept { return q_; }
  Index dim() const noexcept { return q_.rows(); }
  Index rank() const noexcept { return q_.cols(); }
  double tolerance() const noexcept { return tolerance_; }

  BasicOrthonormalBasis leading(Index k) const {
    if (k < 0 || k > rank()) {
      throw DimensionMismatch("cannot take " + std::to_string(k) +
                              " leading columns of a rank-" +
                              std::to_string(rank()) + " basis");
    }
    return BasicOrthonormalBasis(q_.leftCols(k), tolerance_);
  }

 private:
  BasicOrthonormalBasis(MatrixType q, double tolerance)
      : q_(std::move(q)), tolerance_(tolerance) {}

  MatrixType q_;
  double tolerance_;
};

using OrthonormalBasis = BasicOrthonormalBasis<double>;

template <typename Scalar>
struct BasicSvdResult {
  BasicOrthonormalBasis<Scalar> u;
  VectorX<Scalar> singular_values;  // non-increasing, nonnegative
  BasicOrthonormalBasis<Scalar> v;

  MatrixX<Scalar> reconstruct() const {
    return u.matrix() * singular_values.asDiagonal() * v.matrix().transpose();
  }

  /// Leading k triplets.
  BasicSvdResult truncated(Index k) const {
    return {u.leading(k), singular_values.head(k), v.leading(k)};
  }
};

using SvdResult = BasicSvdResult<double>;

/// Thin QR orthonormalization with a nonnegative R diagonal.
///
/// Strict mode rejects inputs whose smallest |R_jj| falls below
/// rank_tol * ||y||_2. Complete mode accepts them; the returned columns
/// still span range(y) and are orthonormal.
template <typename Derived>
BasicOrthonormalBasis<typename Derived::Scalar> orth(
    const Eigen::MatrixBase<Derived>& y, RankPolicy policy = RankPolicy::strict,
    double rank_tol = tol::rank) {
  using Scalar = typename Derived::Scalar;
  using M = MatrixX<Scalar>;
  const Index d = y.rows();
  const Index r = y.cols();
  if (r > d) {
    throw DimensionMismatch("orth needs rows >= cols, got " + detail::shape(d, r));
  }
  Eigen::HouseholderQR<M> qr(y.derived());
  M q = qr.householderQ() * M::Identity(d, r);
  const auto& packed = qr.matrixQR();

  if (policy == RankPolicy::strict && r > 0) {
    Eigen::JacobiSVD<M> sv(y.derived());
    const double norm2 = sv.singularValues().size() ? sv.singularValues()(0) : 0.0;
    const double threshold = rank_tol * norm2;
    for (Index j = 0; j < r; ++j) {
      const double pivot = std::abs(static_cast<double>(packed(j, j)));
      if (norm2 == 0.0 || pivot < threshold) {
        std::ostringstream os;
        os << "orth: column " << j << " pivot " << pivot
           << " below threshold " << threshold;
        throw RankDeficient(os.str());
      }
    }
  }
  for (Index j = 0; j < r; ++j) {
    if (packed(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  }
  return BasicOrthonormalBasis<Scalar>::adopt_unchecked(std::move(q));
}

/// (1/s) A^T A for an s x d shard, exactly symmetric.
template <typename Derived>
MatrixX<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& shard) {
  using Scalar = typename Derived::Scalar;
  const Index s = shard.rows();
  const Index d = shard.cols();
  if (s < 1) throw InvalidArgument("gram of an empty shard");
  MatrixX<Scalar> g = MatrixX<Scalar>::Zero(d, d);
  g.template selfadjointView<Eigen::Lower>().rankUpdate(shard.derived().transpose(),
                                                        Scalar(1) / Scalar(s));
  g.template triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

/// Reference thin SVD. Two-sided Jacobi for small problems, divide and
/// conquer above 128 in the smaller dimension.
template <typename Derived>
BasicSvdResult<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using M = MatrixX<Scalar>;
  if (!detail::all_finite(a)) throw InvalidArgument("svd input has non-finite entries");
  const unsigned opts = Eigen::ComputeThinU | Eigen::ComputeThinV;
  M u, v;
  VectorX<Scalar> s;
  Eigen::ComputationInfo info;
  if (std::min(a.rows(), a.cols()) <= 128) {
    Eigen::JacobiSVD<M> solver(a.derived(), opts);
    info = solver.info();
    u = solver.matrixU();
    v = solver.matrixV();
    s = solver.singularValues();
  } else {
    Eigen::BDCSVD<M> solver(a.derived(), opts);
    info = solver.info();
    u = solver.matrixU();
    v = solver.matrixV();
    s = solver.singularValues();
  }
  if (info != Eigen::Success || !detail::all_finite(u) || !detail::all_finite(v) ||
      !detail::all_finite(s)) {
    throw ConvergenceFailure("svd did not converge for a " +
                             detail::shape(a.rows(), a.cols()) + " matrix");
  }
  detail::complete_columns(u);
  detail::complete_columns(v);
  return {BasicOrthonormalBasis<Scalar>::adopt(std::move(u), 1e-9), std::move(s),
          BasicOrthonormalBasis<Scalar>::adopt(std::move(v), 1e-9)};
}

template <typename Derived>
double spectral_norm(const Eigen::MatrixBase<Derived>& a) {
  using M = MatrixX<typename Derived::Scalar>;
  if (a.size() == 0) return 0.0;
  if (!detail::all_finite(a)) throw InvalidArgument("spectral_norm of non-finite matrix");
  if (std::min(a.rows(), a.cols()) <= 128) {
    Eigen::JacobiSVD<M> solver(a.derived());
    if (solver.info() != Eigen::Success) throw ConvergenceFailure("spectral_norm");
    return static_cast<double>(solver.singularValues()(0));
  }
  Eigen::BDCSVD<M> solver(a.derived());
  if (solver.info() != Eigen::Success) throw ConvergenceFailure("spectral_norm");
  return static_cast<double>(solver.singularValues()(0));
}

/// ||(I - Z Z^T) V||_2 for orthonormal Z (d x r) and V (d x k), r >= k.
template <typename Scalar>
double sin_theta_k(const BasicOrthonormalBasis<Scalar>& z,
                   const BasicOrthonormalBasis<Scalar>& v_k) {
  if (z.dim() != v_k.dim() || z.rank() < v_k.rank()) {
    throw DimensionMismatch("sin_theta_k: basis " + detail::shape(z.dim(), z.rank()) +
                            " vs reference " + detail::shape(v_k.dim(), v_k.rank()));
  }
  const auto& zm = z.matrix();
  const auto& vm = v_k.matrix();
  const MatrixX<Scalar> residual = vm - zm * (zm.transpose() * vm);
  return spectral_norm(residual);
}

/// ||U U^T - V V^T||_2 for two k-dimensional subspaces of R^d.
template <typename Scalar>
double projection_distance(const BasicOrthonormalBasis<Scalar>& u,
                           const BasicOrthonormalBasis<Scalar>& v) {
  if (u.dim() != v.dim() || u.rank() != v.rank()) {
    throw DimensionMismatch("projection_distance: " + detail::shape(u.dim(), u.rank()) +
                            " vs " + detail::shape(v.dim(), v.rank()));
  }
  // The residual form avoids the cancellation in sqrt(1 - cos^2); taking the
  // max of both orientations makes the result exactly symmetric.
  return std::max(sin_theta_k(u, v), sin_theta_k(v, u));
}

/// Orthogonal D minimizing ||z_i D - z_base||_F: D = W1 W2^T from the SVD
/// z_i^T z_base = W1 S W2^T.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> procrustes(const Eigen::MatrixBase<DerivedA>& z_i,
                                              const Eigen::MatrixBase<DerivedB>& z_base) {
  using Scalar = typename DerivedA::Scalar;
  using M = MatrixX<Scalar>;
  if (z_i.rows() != z_base.rows() || z_i.cols() != z_base.cols()) {
    throw DimensionMismatch("procrustes: " + detail::shape(z_i.rows(), z_i.cols()) +
                            " vs " + detail::shape(z_base.rows(), z_base.cols()));
  }
  if (z_i == z_base) return M::Identity(z_i.cols(), z_i.cols());
  const M cross = z_i.transpose() * z_base;
  Eigen::JacobiSVD<M> solver(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (solver.info() != Eigen::Success) throw ConvergenceFailure("procrustes svd");
  M w1 = solver.matrixU();
  M w2 = solver.matrixV();
  const auto& s = solver.singularValues();
  const bool deficient = s.size() > 0 && !(s(s.size() - 1) > tol::rank * s(0));
  if (deficient) {
    detail::complete_columns(w1);
    detail::complete_columns(w2);
  }
  return w1 * w2.transpose();
}

/// Diagonal +-1 matrix with D_jj = sgn(<z_i[:,j], z_base[:,j]>); ties go to +1.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> sign_fix(const Eigen::MatrixBase<DerivedA>& z_i,
                                            const Eigen::MatrixBase<DerivedB>& z_base) {
  using Scalar = typename DerivedA::Scalar;
  if (z_i.rows() != z_base.rows() || z_i.cols() != z_base.cols()) {
    throw DimensionMismatch("sign_fix: " + detail::shape(z_i.rows(), z_i.cols()) +
                            " vs " + detail::shape(z_base.rows(), z_base.cols()));
  }
  const Index r = z_i.cols();
  MatrixX<Scalar> d = MatrixX<Scalar>::Zero(r, r);
  for (Index j = 0; j < r; ++j) {
    d(j, j) = z_i.col(j).dot(z_base.col(j)) < Scalar(0) ? Scalar(-1) : Scalar(1);
  }
  return d;
}

/// The r x r alignment matrix for `rule` (identity when rule is none).
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> alignment_matrix(Alignment rule,
                                                    const Eigen::MatrixBase<DerivedA>& z_i,
                                                    const Eigen::MatrixBase<DerivedB>& z_base) {
  switch (rule) {
    case Alignment::opt:
      return procrustes(z_i, z_base);
    case Alignment::sign_fix:
      return sign_fix(z_i, z_base);
    case Alignment::none:
      break;
  }
  if (z_i.rows() != z_base.rows() || z_i.cols() != z_base.cols()) {
    throw DimensionMismatch("alignment: " + detail::shape(z_i.rows(), z_i.cols()) +
                            " vs " + detail::shape(z_base.rows(), z_base.cols()));
  }
  return MatrixX<typename DerivedA::Scalar>::Identity(z_i.cols(), z_i.cols());
}

/// ||z_i D - z_base||_F.
template <typename DA, typename DD, typename DB>
double alignment_objective(const Eigen::MatrixBase<DA>& z_i,
                           const Eigen::MatrixBase<DD>& d,
                           const Eigen::MatrixBase<DB>& z_base) {
  return static_cast<double>((z_i * d - z_base).norm());
}

}  // namespace fedpower
