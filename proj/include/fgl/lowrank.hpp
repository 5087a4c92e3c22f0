#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "fgl/error.hpp"
#include "fgl/flows.hpp"
#include "fgl/matexp.hpp"
#include "fgl/params.hpp"
#include "fgl/types.hpp"

namespace fgl {

/// X = S Sigma V^* with orthonormal S ((N_x-1) x r), V ((N_y-1) x r) and nonsingular r x r Sigma.
/// Sigma is not diagonal in general.
struct LowRankState {
  CMatrix s;
  CMatrix sigma;
  CMatrix v;

  Index rank() const { return sigma.rows(); }
  Index rows() const { return s.rows(); }
  Index cols() const { return v.rows(); }
  bool all_finite() const { return s.allFinite() && sigma.allFinite() && v.allFinite(); }
};

/// Set when a step leaves Sigma singular to working precision or ill-conditioned.
struct Degeneracy {
  bool flagged = false;
  double smallest_singular_value = 0.0;
  double condition = 1.0;
};

namespace detail {

/// Thin Householder QR with diag(R) made real nonnegative, so factors are reproducible.
inline std::pair<CMatrix, CMatrix> normalized_qr(const CMatrix& a) {
  const Index n = a.rows();
  const Index r = a.cols();
  Eigen::HouseholderQR<CMatrix> qr(a);
  CMatrix q = qr.householderQ() * CMatrix::Identity(n, r);
  CMatrix rr = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Index k = 0; k < r; ++k) {
    const double mag = std::abs(rr(k, k));
    if (mag == 0.0) continue;
    const Complex phase = rr(k, k) / mag;
    q.col(k) *= phase;
    rr.row(k) *= std::conj(phase);
    rr(k, k) = mag;
  }
  return {std::move(q), std::move(rr)};
}

inline RVector singular_values(const CMatrix& a) {
  return Eigen::JacobiSVD<CMatrix>(a).singularValues();
}

inline Degeneracy assess(const CMatrix& sigma, double cond_threshold) {
  const RVector sv = singular_values(sigma);
  Degeneracy d;
  d.smallest_singular_value = sv.size() ? sv(sv.size() - 1) : 0.0;
  d.condition = d.smallest_singular_value > 0.0 ? sv(0) / d.smallest_singular_value
                                                : std::numeric_limits<double>::infinity();
  d.flagged = !(d.condition <= cond_threshold);
  return d;
}

/// G(left right^*) right, evaluated over row panels so the full G(X) is never held.
inline CMatrix g_times(const Nonlinearity& g, const CMatrix& left, const CMatrix& right, Index panel) {
  CMatrix out(left.rows(), right.cols());
  for (Index i0 = 0; i0 < left.rows(); i0 += panel) {
    const Index p = std::min(panel, left.rows() - i0);
    const CMatrix xp = left.middleRows(i0, p) * right.adjoint();
    out.middleRows(i0, p).noalias() = g(xp) * right;
  }
  return out;
}

/// s^* G(left right^*), accumulated over row panels.
inline CMatrix adjoint_times_g(const Nonlinearity& g, const CMatrix& s, const CMatrix& left,
                               const CMatrix& right, Index panel) {
  CMatrix out = CMatrix::Zero(s.cols(), right.rows());
  for (Index i0 = 0; i0 < left.rows(); i0 += panel) {
    const Index p = std::min(panel, left.rows() - i0);
    const CMatrix xp = left.middleRows(i0, p) * right.adjoint();
    out.noalias() += s.middleRows(i0, p).adjoint() * g(xp);
  }
  return out;
}

template <typename Rhs>
CMatrix rk4(CMatrix y, double tau, int substeps, const Rhs& f) {
  const double h = tau / substeps;
  for (int s = 0; s < substeps; ++s) {
    const CMatrix k1 = f(y);
    const CMatrix k2 = f(CMatrix(y + 0.5 * h * k1));
    const CMatrix k3 = f(CMatrix(y + 0.5 * h * k2));
    const CMatrix k4 = f(CMatrix(y + h * k3));
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return y;
}

}  // namespace detail

struct Truncation {
  LowRankState state;
  double discarded = 0.0;      // ||X^0 - U^0||_F, root-sum-square of the dropped singular values
  RVector singular_values;     // all singular values of the input
};

/// Best rank-r approximation in the Frobenius norm.
inline Truncation truncate_svd(const ComplexField& u, Index r) {
  const Index min_dim = std::min(u.rows(), u.cols());
  if (r < 1 || r > min_dim)
    throw ArgumentError("truncation rank " + std::to_string(r) + " outside [1, " + std::to_string(min_dim) + "]");
  Eigen::BDCSVD<CMatrix> svd(u, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  Truncation t;
  t.singular_values = sv;
  t.state.s = svd.matrixU().leftCols(r);
  t.state.v = svd.matrixV().leftCols(r);
  t.state.sigma = sv.head(r).cast<Complex>().asDiagonal();
  t.discarded = sv.tail(sv.size() - r).norm();
  return t;
}

inline ComplexField reconstruct(const LowRankState& x) { return x.s * x.sigma * x.v.adjoint(); }

/// P(X) W = S S^* W - S S^* W V V^* + W V V^*, kept as skinny factors.
struct TangentVector {
  CMatrix s;     // rows x r
  CMatrix v;     // cols x r
  CMatrix sw;    // r x cols,  S^* W
  CMatrix wv;    // rows x r,  W V
  CMatrix core;  // r x r,     S^* W V

  ComplexField dense() const {
    return s * sw - (s * core) * v.adjoint() + wv * v.adjoint();
  }
};

inline TangentVector tangent_project(const LowRankState& x, const ComplexField& w) {
  if (w.rows() != x.rows() || w.cols() != x.cols())
    throw ShapeError("tangent projection: field shape does not match the state");
  TangentVector t;
  t.s = x.s;
  t.v = x.v;
  t.sw = x.s.adjoint() * w;
  t.wv = w * x.v;
  t.core = x.s.adjoint() * t.wv;
  return t;
}

/// ||G(X) - P(X) G(X)||_F, the part of the nonlinear field normal to the rank-r manifold.
inline double tangent_residual(const LowRankState& x, const Nonlinearity& g) {
  const ComplexField gx = g(reconstruct(x));
  return (gx - tangent_project(x, gx).dense()).norm();
}

inline double tangent_residual(const LowRankState& x, const FglParams& params) {
  return tangent_residual(x, Nonlinearity::from(params));
}

/// Exact rank-preserving linear flow: S <- e^{tau A_x} S, V <- e^{tau conj(A_y)} V, then QR of
/// both factors with the triangular parts folded into Sigma.
inline LowRankState lowrank_linear_flow(const LowRankState& x, const ExpBackend& ax, const ExpBackend& ay,
                                        Degeneracy* warn = nullptr, double cond_threshold = 1e12) {
  if (x.rows() != ax.size() || x.cols() != ay.size())
    throw ShapeError("low-rank linear flow: state shape does not match the operators");
  auto [qs, rs] = detail::normalized_qr(ax.apply(x.s));
  auto [qv, rv] = detail::normalized_qr(ay.apply(x.v, Conjugate::Yes));
  LowRankState out{std::move(qs), rs * x.sigma * rv.adjoint(), std::move(qv)};
  if (warn) *warn = detail::assess(out.sigma, cond_threshold);
  return out;
}

/// One projector-splitting step of X' = P(X) G(X) in factored K/S/L form:
///   K-step  K = S Sigma,   K' = G(K V^*) V,             K(tau) = S1 Sigma_hat
///   S-step  Sigma' = -S1^* G(S1 Sigma V^*) V           from Sigma_hat
///   L-step  L = V Sigma^*, L' = G(S1 L^*)^* S1,         L(tau) = V1 Sigma1^*
/// Each substep is integrated with its own `rk4_substeps` classical RK4 steps.
inline LowRankState projector_split_nonlinear_step(const LowRankState& x, double tau, const Nonlinearity& g,
                                                   int rk4_substeps, Index panel_rows = 256,
                                                   Degeneracy* warn = nullptr, double cond_threshold = 1e12) {
  if (rk4_substeps < 1) throw ArgumentError("projector splitting needs rk4_substeps >= 1");
  if (panel_rows < 1) throw ArgumentError("panel height must be positive");
  if (!(tau >= 0.0)) throw ArgumentError("projector splitting needs tau >= 0");

  const CMatrix& v0 = x.v;
  const CMatrix k = detail::rk4(CMatrix(x.s * x.sigma), tau, rk4_substeps,
                                [&](const CMatrix& kk) { return detail::g_times(g, kk, v0, panel_rows); });
  auto [s1, sigma_hat] = detail::normalized_qr(k);

  const CMatrix sigma_tilde = detail::rk4(sigma_hat, tau, rk4_substeps, [&](const CMatrix& sg) {
    return CMatrix(-(s1.adjoint() * detail::g_times(g, CMatrix(s1 * sg), v0, panel_rows)));
  });

  const CMatrix l = detail::rk4(CMatrix(v0 * sigma_tilde.adjoint()), tau, rk4_substeps, [&](const CMatrix& ll) {
    return CMatrix(detail::adjoint_times_g(g, s1, s1, ll, panel_rows).adjoint());
  });
  auto [v1, r_l] = detail::normalized_qr(l);

  LowRankState out{std::move(s1), r_l.adjoint(), std::move(v1)};
  if (warn) *warn = detail::assess(out.sigma, cond_threshold);
  return out;
}

/// Both subflows of L_{tau,r} = Phi^L_tau o Phi~^G_tau.
struct LowRankStepper {
  ExpBackend ax;
  ExpBackend ay;
  Nonlinearity g;
  int rk4_substeps = 1;
  Index panel_rows = 256;
  double cond_threshold = 1e12;
  double tau = 0.0;

  LowRankStepper(ExpBackend ax_, ExpBackend ay_, Nonlinearity g_, int rk4_substeps_ = 1)
      : ax(std::move(ax_)), ay(std::move(ay_)), g(g_), rk4_substeps(rk4_substeps_), tau(ax.tau()) {
    if (ax.tau() != ay.tau()) throw ArgumentError("low-rank stepper: both exponentials need the same tau");
    if (rk4_substeps < 1) throw ArgumentError("low-rank stepper: rk4_substeps must be >= 1");
  }

  static LowRankStepper make(const FglParams& params, const Grid& grid, int rk4_substeps = 1,
                             Index dense_limit = kDefaultDenseLimit, KrylovOptions krylov = {}) {
    const FracOperator op_x = build_operator(params, grid, Axis::X);
    const FracOperator op_y = build_operator(params, grid, Axis::Y);
    return LowRankStepper(ExpBackend::automatic(op_x, grid.tau, dense_limit, krylov),
                          ExpBackend::automatic(op_y, grid.tau, dense_limit, krylov),
                          Nonlinearity::from(params), rk4_substeps);
  }
};

/// X^{k+1} = Phi^L_tau(Phi~^G_tau(X^k)).
inline LowRankState lowrank_step(const LowRankState& x, const LowRankStepper& st, Degeneracy* warn = nullptr) {
  const LowRankState mid =
      projector_split_nonlinear_step(x, st.tau, st.g, st.rk4_substeps, st.panel_rows, nullptr, st.cond_threshold);
  return lowrank_linear_flow(mid, st.ax, st.ay, warn, st.cond_threshold);
}

struct StepDiagnostics {
  int step = 0;
  double t = 0.0;
  RVector singular_values;                // of Sigma, descending
  std::optional<double> tangent_residual;  // when requested
  double condition = 1.0;                 // cond(Sigma)
  bool degenerate = false;
};

struct LowRankDiagnosticsOptions {
  bool tangent_residual = false;
};

struct LowRankTrajectory {
  LowRankState final_state;
  std::vector<StepDiagnostics> steps;
};

inline LowRankTrajectory integrate_lowrank(const LowRankState& x0, const LowRankStepper& stepper, int m,
                                           LowRankDiagnosticsOptions opts = {}) {
  if (m < 1) throw ArgumentError("integrate_lowrank needs m >= 1");
  LowRankTrajectory traj;
  traj.steps.reserve(static_cast<std::size_t>(m));
  LowRankState x = x0;
  for (int k = 1; k <= m; ++k) {
    Degeneracy deg;
    x = lowrank_step(x, stepper, &deg);
    if (!x.all_finite()) throw NumericalError("low-rank integration produced non-finite values", k);
    StepDiagnostics d;
    d.step = k;
    d.t = k * stepper.tau;
    d.singular_values = detail::singular_values(x.sigma);
    d.condition = deg.condition;
    d.degenerate = deg.flagged;
    if (opts.tangent_residual) d.tangent_residual = tangent_residual(x, stepper.g);
    traj.steps.push_back(std::move(d));
  }
  traj.final_state = std::move(x);
  return traj;
}

/// CSV rows: step, t, sigma_1 .. sigma_r, tangent_residual, cond_sigma.
inline void write_diagnostics_csv(std::ostream& os, const std::vector<StepDiagnostics>& steps) {
  const Index r = steps.empty() ? 0 : steps.front().singular_values.size();
  os << "step,t";
  for (Index i = 1; i <= r; ++i) os << ",sigma_" << i;
  os << ",tangent_residual,cond_sigma\r\n";
  char buf[64];
  for (const auto& d : steps) {
    os << d.step;
    std::snprintf(buf, sizeof buf, "%.10E", d.t);
    os << ',' << buf;
    for (Index i = 0; i < d.singular_values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10E", d.singular_values(i));
      os << ',' << buf;
    }
    if (d.tangent_residual) {
      std::snprintf(buf, sizeof buf, "%.10E", *d.tangent_residual);
      os << ',' << buf;
    } else {
      os << ',';
    }
    std::snprintf(buf, sizeof buf, "%.10E", d.condition);
    os << ',' << buf << "\r\n";
  }
}

}  // namespace fgl
