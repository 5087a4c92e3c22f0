#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include <unsupported/Eigen/MatrixFunctions>

#include "fgl/error.hpp"
#include "fgl/fracgrid.hpp"
#include "fgl/types.hpp"

namespace fgl {

inline constexpr Index kDefaultDenseLimit = 1024;

/// Scaling-and-squaring exponential of a small dense matrix.
inline CMatrix expm(const CMatrix& a) { return a.exp(); }

/// e^{tau A} as a dense matrix. Only for op.size() <= dense_limit.
inline CMatrix dense_expm(const FracOperator& op, double tau, Index dense_limit = kDefaultDenseLimit) {
  if (op.size() > dense_limit)
    throw CapabilityError("dense exponential requested for size " + std::to_string(op.size()) +
                          " above the dense limit " + std::to_string(dense_limit));
  if (tau == 0.0) return CMatrix::Identity(op.size(), op.size());
  return expm(tau * op.dense());
}

struct KrylovOptions {
  int max_subspace = 60;
  double tolerance = 1e-10;  // relative to the norm of each input column
  int max_substeps = 1024;
};

enum class Conjugate { No, Yes };

namespace detail {

struct ArnoldiBasis {
  CMatrix v;  // n x (m+1) orthonormal columns
  CMatrix h;  // (m+1) x m upper Hessenberg
  Index dim = 0;
  bool invariant = false;
};

/// exp(dt * Hbar) where Hbar is h padded to a square (m+1)x(m+1) matrix. Column 0 rows 0..m-1
/// hold exp(dt H_m) e_1; row m holds h_{m+1,m} dt e_m^T phi_1(dt H_m) e_1, the error indicator.
inline CVector augmented_exp_column(const ArnoldiBasis& b, double dt) {
  const Index m = b.dim;
  const Index k = b.invariant ? m : m + 1;
  CMatrix hbar = CMatrix::Zero(k, k);
  hbar.topLeftCorner(k, m) = dt * b.h.topLeftCorner(k, m);
  return expm(hbar).col(0);
}

template <typename MatVec>
CVector krylov_expv(const MatVec& matvec, Index n, double tau, const CVector& v,
                    const KrylovOptions& opt) {
  const double beta0 = v.norm();
  if (beta0 == 0.0 || tau == 0.0) return v;
  const Index m_max = std::min<Index>(opt.max_subspace, n);
  const double dt_min = tau / opt.max_substeps;

  CVector w = v;
  double t = 0.0;
  double dt = tau;
  while (t < tau) {
    dt = std::min(dt, tau - t);
    const double beta = w.norm();
    if (beta == 0.0) return w;

    ArnoldiBasis b;
    b.v = CMatrix::Zero(n, m_max + 1);
    b.h = CMatrix::Zero(m_max + 1, m_max);
    b.v.col(0) = w / beta;
    double err = 0.0;
    CVector coeffs;
    bool accepted = false;
    for (Index j = 0; j < m_max; ++j) {
      CVector p = matvec(CVector(b.v.col(j)));
      const double p_norm = p.norm();
      // modified Gram-Schmidt with one reorthogonalization pass
      for (int pass = 0; pass < 2; ++pass)
        for (Index i = 0; i <= j; ++i) {
          const Complex c = b.v.col(i).dot(p);
          b.h(i, j) += c;
          p -= c * b.v.col(i);
        }
      const double h_next = p.norm();
      b.dim = j + 1;
      if (h_next <= 1e-14 * std::max(p_norm, 1.0)) {
        b.invariant = true;
        coeffs = augmented_exp_column(b, dt);
        err = 0.0;
        accepted = true;
        break;
      }
      b.h(j + 1, j) = h_next;
      b.v.col(j + 1) = p / h_next;
      coeffs = augmented_exp_column(b, dt);
      err = beta * std::abs(coeffs(b.dim));
      if (err <= opt.tolerance * beta0 * dt / tau) {
        accepted = true;
        break;
      }
    }
    // Subspace exhausted: shrink the step on the same basis until the estimate passes.
    while (!accepted) {
      dt *= 0.5;
      if (dt < dt_min)
        throw ConvergenceError("Krylov exponential did not converge within " +
                                   std::to_string(m_max) + " basis vectors",
                               err / beta0);
      coeffs = augmented_exp_column(b, dt);
      err = beta * std::abs(coeffs(b.dim));
      accepted = err <= opt.tolerance * beta0 * dt / tau;
    }
    w = beta * (b.v.leftCols(b.dim) * coeffs.head(b.dim));
    t += dt;
    if (tau - t <= 1e-15 * tau) break;
  }
  return w;
}

}  // namespace detail

/// Action of e^{tau A} (or e^{tau conj(A)}) for one fractional operator A. DensePrecomputed
/// stores the exponential; KrylovAction runs Arnoldi per column with the FFT matvec.
class ExpBackend {
 public:
  enum class Kind { DensePrecomputed, KrylovAction };

  static ExpBackend dense(const FracOperator& op, double tau, Index dense_limit = kDefaultDenseLimit) {
    ExpBackend b(Kind::DensePrecomputed, op, tau);
    b.matrix_ = dense_expm(op, tau, dense_limit);
    return b;
  }

  static ExpBackend krylov(const FracOperator& op, double tau, KrylovOptions opts = {}) {
    if (opts.max_subspace < 1 || !(opts.tolerance > 0.0) || opts.max_substeps < 1)
      throw ArgumentError("invalid Krylov options");
    ExpBackend b(Kind::KrylovAction, op, tau);
    b.krylov_ = opts;
    return b;
  }

  /// Dense up to `dense_limit`, Krylov above.
  static ExpBackend automatic(const FracOperator& op, double tau, Index dense_limit = kDefaultDenseLimit,
                              KrylovOptions opts = {}) {
    return op.size() <= dense_limit ? dense(op, tau, dense_limit) : krylov(op, tau, opts);
  }

  Kind kind() const { return kind_; }
  double tau() const { return tau_; }
  Index size() const { return op_.size(); }
  const FracOperator& op() const { return op_; }
  const KrylovOptions& krylov_options() const { return krylov_; }

  /// The precomputed e^{tau A}; empty for the Krylov backend.
  const CMatrix& matrix() const { return matrix_; }

  /// e^{tau A} block, or e^{tau conj(A)} block = conj(e^{tau A} conj(block)).
  CMatrix apply(const CMatrix& block, Conjugate conj = Conjugate::No) const {
    if (block.rows() != size()) throw ShapeError("exponential action: row count != operator size");
    if (conj == Conjugate::Yes) return apply(CMatrix(block.conjugate())).conjugate();
    if (kind_ == Kind::DensePrecomputed) return matrix_ * block;
    CMatrix out(block.rows(), block.cols());
    auto matvec = [this](const CVector& x) { return op_.apply(x); };
    for (Index c = 0; c < block.cols(); ++c)
      out.col(c) = detail::krylov_expv(matvec, size(), tau_, block.col(c), krylov_);
    return out;
  }

 private:
  ExpBackend(Kind kind, const FracOperator& op, double tau) : kind_(kind), op_(op), tau_(tau) {
    if (!(tau >= 0.0)) throw ArgumentError("exponential time scale must be nonnegative");
  }

  Kind kind_;
  FracOperator op_;
  double tau_;
  CMatrix matrix_;
  KrylovOptions krylov_{};
};

inline CMatrix expm_action(const ExpBackend& backend, const CMatrix& block) {
  if (block.cols() > block.rows()) throw ShapeError("exponential action expects a block with r <= n");
  return backend.apply(block);
}

/// e^{tau A_x} U e^{tau A_y}; the right factor is applied as (e^{tau A_y} U^T)^T since A_y^T = A_y.
inline ComplexField linear_flow(const ComplexField& u, const ExpBackend& ax, const ExpBackend& ay) {
  if (u.rows() != ax.size() || u.cols() != ay.size())
    throw ShapeError("linear flow: field shape does not match the operators");
  const CMatrix left = ax.apply(u);
  return ay.apply(left.transpose()).transpose();
}

}  // namespace fgl
