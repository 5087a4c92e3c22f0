#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "fgl/error.hpp"
#include "fgl/flows.hpp"
#include "fgl/fracgrid.hpp"
#include "fgl/params.hpp"
#include "fgl/types.hpp"

namespace fgl {

inline constexpr Index kRk4OracleMaxN = 256;

/// Classical RK4 on the full semi-discrete system U' = A_x U + U A_y + G(U). Oracle only;
/// needs m large enough for explicit stability (instability surfaces as NumericalError).
inline ComplexField rk4_full_ode(const ComplexField& u0, const FglParams& params, const Grid& grid, int m) {
  if (grid.n_x > kRk4OracleMaxN || grid.n_y > kRk4OracleMaxN)
    throw CapabilityError("dense RK4 oracle limited to N <= 256");
  if (m < 1) throw ArgumentError("rk4_full_ode needs m >= 1");
  if (u0.rows() != grid.rows() || u0.cols() != grid.cols()) throw ShapeError("initial field does not match grid");
  const CMatrix ax = build_operator(params, grid, Axis::X).dense();
  const CMatrix ay = build_operator(params, grid, Axis::Y).dense();
  const Nonlinearity g = Nonlinearity::from(params);
  auto rhs = [&](const CMatrix& u) -> CMatrix { return ax * u + u * ay + g(u); };
  const double h = params.t_final / m;
  CMatrix u = u0;
  for (int k = 1; k <= m; ++k) {
    const CMatrix k1 = rhs(u);
    const CMatrix k2 = rhs(CMatrix(u + 0.5 * h * k1));
    const CMatrix k3 = rhs(CMatrix(u + 0.5 * h * k2));
    const CMatrix k4 = rhs(CMatrix(u + h * k3));
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!u.allFinite()) throw NumericalError("RK4 oracle produced non-finite values", static_cast<std::size_t>(k));
  }
  return u;
}

/// ||x - ref||_F / ||ref||_F
inline double relerr(const ComplexField& x, const ComplexField& ref) {
  if (x.rows() != ref.rows() || x.cols() != ref.cols()) throw ShapeError("relerr: shapes differ");
  const double denom = ref.norm();
  if (!(denom > 0.0)) throw ArgumentError("relerr: reference has zero norm");
  return (x - ref).norm() / denom;
}

enum class RateAxis { Tau, H };

struct RefinementError {
  double refinement = 0.0;  // tau or h
  double relerr = 0.0;
};

/// Pairwise observed orders log(e_i / e_{i+1}) / log(d_i / d_{i+1}). Entries with a zero or
/// non-finite error yield an empty (undefined) rate.
inline std::vector<std::optional<double>> observed_rate(const std::vector<RefinementError>& errs,
                                                        RateAxis /*axis*/ = RateAxis::Tau) {
  if (errs.size() < 2) throw ArgumentError("observed_rate needs at least two refinements");
  const bool decreasing = errs[1].refinement < errs[0].refinement;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double a = errs[i].refinement, b = errs[i + 1].refinement;
    if (!(a > 0.0 && b > 0.0) || (decreasing ? !(b < a) : !(b > a)))
      throw ArgumentError("observed_rate needs strictly monotone positive refinements");
  }
  std::vector<std::optional<double>> rates;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double e1 = errs[i].relerr, e2 = errs[i + 1].relerr;
    if (!(e1 > 0.0) || !(e2 > 0.0) || !std::isfinite(e1) || !std::isfinite(e2)) {
      rates.emplace_back();
      continue;
    }
    rates.emplace_back(std::log(e1 / e2) / std::log(errs[i].refinement / errs[i + 1].refinement));
  }
  return rates;
}

/// One table cell with the configuration it was measured at.
struct ErrorReport {
  double relerr = 0.0;
  std::optional<double> rate;
  double alpha = 0.0;
  double beta = 0.0;
  int n = 0;
  int m = 0;
  int rank = 0;  // 0 = full-rank split solution
};

/// Samples a field on the N_fine grid at the nodes of the nested N_coarse grid.
inline ComplexField restrict_to_grid(const ComplexField& fine, int n_fine, int n_coarse) {
  if (n_coarse < 1 || n_fine % n_coarse != 0) throw ArgumentError("grids are not nested");
  if (fine.rows() != n_fine - 1 || fine.cols() != n_fine - 1) throw ShapeError("fine field does not match N_fine");
  const int ratio = n_fine / n_coarse;
  ComplexField out(n_coarse - 1, n_coarse - 1);
  for (int j = 1; j < n_coarse; ++j)
    for (int i = 1; i < n_coarse; ++i) out(i - 1, j - 1) = fine(i * ratio - 1, j * ratio - 1);
  return out;
}

/// Fine-step full-rank Lie-Trotter solution (closed-form nonlinear flow) at t_final on the
/// square N x N grid. Uncached; see reference_cache.hpp for the on-disk variant.
inline ComplexField compute_reference(const FglParams& params, int n, int m_ref,
                                      Index dense_limit = kDefaultDenseLimit) {
  const Grid grid = Grid::square(params, n, m_ref);
  const SplitStepper stepper = SplitStepper::make(params, grid, nonlinear::ClosedForm{}, dense_limit);
  return integrate_full(initial_field(params, grid), stepper, m_ref).final_field;
}

}  // namespace fgl
