#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <variant>
#include <vector>

#include "fgl/error.hpp"
#include "fgl/fracgrid.hpp"
#include "fgl/matexp.hpp"
#include "fgl/params.hpp"
#include "fgl/types.hpp"

namespace fgl {

/// G(U) = -(kappa + i xi) |U|^2 U + gamma U, acting entrywise.
struct Nonlinearity {
  double kappa = 0.0;
  double xi = 0.0;
  double gamma = 0.0;

  static Nonlinearity from(const FglParams& p) { return {p.kappa, p.xi, p.gamma}; }

  Complex operator()(Complex u) const {
    return (Complex(-kappa, -xi) * std::norm(u) + gamma) * u;
  }

  CMatrix operator()(const CMatrix& u) const {
    return u.unaryExpr([this](Complex z) { return (*this)(z); });
  }

  bool is_zero() const { return kappa == 0.0 && xi == 0.0 && gamma == 0.0; }
};

namespace nonlinear {
struct ClosedForm {};
struct RK4 {
  int substeps = 1;
};
}  // namespace nonlinear

using NonlinearMethod = std::variant<nonlinear::ClosedForm, nonlinear::RK4>;

/// Exact solution of u' = G(u) for one entry over time tau.
///
/// rho = |u|^2 obeys the logistic law rho' = 2 gamma rho - 2 kappa rho^2; with
/// E = (e^{2 gamma tau} - 1) / (2 gamma)  (E = tau for gamma = 0) and q = 2 kappa rho0 E,
///   |u(tau)| = |u0| e^{gamma tau} / sqrt(1 + q),
///   arg u(tau) - arg u0 = -xi int_0^tau rho = -xi log1p(q) / (2 kappa)   (-xi rho0 E for kappa = 0).
inline Complex nonlinear_closed_form(Complex u0, double tau, const Nonlinearity& g) {
  const double rho0 = std::norm(u0);
  if (rho0 == 0.0) return Complex(0.0, 0.0);
  const double e = g.gamma == 0.0 ? tau : std::expm1(2.0 * g.gamma * tau) / (2.0 * g.gamma);
  const double q = 2.0 * g.kappa * rho0 * e;
  if (1.0 + q <= 0.0) throw Error("nonlinear flow: non-positive logistic denominator");
  const double integral = g.kappa == 0.0 ? rho0 * e : std::log1p(q) / (2.0 * g.kappa);
  const double scale = std::exp(g.gamma * tau) / std::sqrt(1.0 + q);
  return u0 * scale * std::polar(1.0, -g.xi * integral);
}

/// Classical RK4 on U' = G(U) with `substeps` equal steps.
inline CMatrix rk4_nonlinear(const CMatrix& u, double tau, const Nonlinearity& g, int substeps) {
  if (substeps < 1) throw ArgumentError("RK4 needs at least one substep");
  const double h = tau / substeps;
  CMatrix x = u;
  for (int s = 0; s < substeps; ++s) {
    const CMatrix k1 = g(x);
    const CMatrix k2 = g(CMatrix(x + 0.5 * h * k1));
    const CMatrix k3 = g(CMatrix(x + 0.5 * h * k2));
    const CMatrix k4 = g(CMatrix(x + h * k3));
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

inline ComplexField nonlinear_flow(const ComplexField& u, double tau, const Nonlinearity& g,
                                   const NonlinearMethod& method = nonlinear::ClosedForm{}) {
  if (!(tau >= 0.0)) throw ArgumentError("nonlinear flow needs tau >= 0");
  if (const auto* rk = std::get_if<nonlinear::RK4>(&method)) return rk4_nonlinear(u, tau, g, rk->substeps);
  return u.unaryExpr([&](Complex z) { return nonlinear_closed_form(z, tau, g); });
}

/// Both subflows of the full-rank Lie-Trotter scheme L_tau = Phi^L_tau o Phi^G_tau.
struct SplitStepper {
  ExpBackend ax;
  ExpBackend ay;
  Nonlinearity g;
  NonlinearMethod method = nonlinear::ClosedForm{};
  double tau = 0.0;

  SplitStepper(ExpBackend ax_, ExpBackend ay_, Nonlinearity g_, NonlinearMethod method_ = nonlinear::ClosedForm{})
      : ax(std::move(ax_)), ay(std::move(ay_)), g(g_), method(method_), tau(ax.tau()) {
    if (ax.tau() != ay.tau()) throw ArgumentError("split stepper: both exponentials need the same tau");
  }

  static SplitStepper make(const FglParams& params, const Grid& grid,
                           NonlinearMethod method = nonlinear::ClosedForm{},
                           Index dense_limit = kDefaultDenseLimit, KrylovOptions krylov = {}) {
    const FracOperator op_x = build_operator(params, grid, Axis::X);
    const FracOperator op_y = build_operator(params, grid, Axis::Y);
    return SplitStepper(ExpBackend::automatic(op_x, grid.tau, dense_limit, krylov),
                        ExpBackend::automatic(op_y, grid.tau, dense_limit, krylov),
                        Nonlinearity::from(params), method);
  }
};

/// U^{k+1} = Phi^L_tau(Phi^G_tau(U^k)): nonlinear substep first, then the linear one.
inline ComplexField lie_trotter_step(const ComplexField& u, const SplitStepper& stepper) {
  return linear_flow(nonlinear_flow(u, stepper.tau, stepper.g, stepper.method), stepper.ax, stepper.ay);
}

struct FullTrajectory {
  ComplexField final_field;
  std::vector<std::pair<int, ComplexField>> snapshots;  // (step index k, U^k)
};

/// U^m = L_tau^m(U^0). Snapshots are stored only for the requested step indices.
inline FullTrajectory integrate_full(const ComplexField& u0, const SplitStepper& stepper, int m,
                                     const std::vector<int>& snapshot_steps = {}) {
  if (m < 1) throw ArgumentError("integrate_full needs m >= 1");
  FullTrajectory traj;
  ComplexField u = u0;
  for (int k = 1; k <= m; ++k) {
    u = lie_trotter_step(u, stepper);
    if (!u.allFinite()) throw NumericalError("full-rank integration produced non-finite values", k);
    if (std::find(snapshot_steps.begin(), snapshot_steps.end(), k) != snapshot_steps.end())
      traj.snapshots.emplace_back(k, u);
  }
  traj.final_field = std::move(u);
  return traj;
}

}  // namespace fgl
