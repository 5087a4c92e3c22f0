#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>

#include "fgl/error.hpp"
#include "fgl/types.hpp"

namespace fgl {

struct Domain {
  double x_left = -10.0;
  double x_right = 10.0;
  double y_left = -10.0;
  double y_right = 10.0;
};

namespace initial {

/// u0 = 2 sech(x) sech(y) exp(3i(x+y))
struct Example1 {};

/// u0 = exp(-2(x^2+y^2)) exp(i S0), S0 = 1 / (exp(x+y) + exp(-(x+y)))
struct Example2 {};

/// Smooth separable sum of `rank` Gaussian wave packets with geometrically decaying weights.
struct RankR {
  int rank = 1;
  std::uint64_t seed = 0;
};

/// Interior samples supplied by the caller; shape must match the grid.
struct Custom {
  CMatrix samples;
};

}  // namespace initial

using InitialCondition =
    std::variant<initial::Example1, initial::Example2, initial::RankR, initial::Custom>;

/// Coefficients of  u_t = (nu + i eta)(D_x^alpha + D_y^beta) u - (kappa + i xi)|u|^2 u + gamma u.
struct FglParams {
  double nu = 1.0;
  double eta = 1.0;
  double kappa = 1.0;
  double xi = 1.0;
  double gamma = 1.0;
  double alpha = 1.5;
  double beta = 1.5;
  Domain domain{};
  double t_final = 1.0;
  InitialCondition initial_condition = initial::Example1{};

  void validate() const {
    if (!(nu > 0.0)) throw ParameterError("nu must be positive");
    if (!(kappa >= 0.0)) throw ParameterError("kappa must be nonnegative");
    if (!(alpha > 1.0 && alpha < 2.0)) throw ParameterError("alpha must lie in (1, 2)");
    if (!(beta > 1.0 && beta < 2.0)) throw ParameterError("beta must lie in (1, 2)");
    if (!(domain.x_left < domain.x_right)) throw ParameterError("x_left must be below x_right");
    if (!(domain.y_left < domain.y_right)) throw ParameterError("y_left must be below y_right");
    if (!(t_final > 0.0)) throw ParameterError("t_final must be positive");
    if (!std::isfinite(eta) || !std::isfinite(xi) || !std::isfinite(gamma))
      throw ParameterError("eta, xi and gamma must be finite");
    if (const auto* rr = std::get_if<initial::RankR>(&initial_condition); rr && rr->rank < 1)
      throw ParameterError("RankR initial condition needs rank >= 1");
  }

  static FglParams example1(double alpha = 1.5, double beta = 1.5) {
    FglParams p;
    p.nu = p.eta = p.kappa = p.xi = p.gamma = 1.0;
    p.alpha = alpha;
    p.beta = beta;
    p.domain = {-10.0, 10.0, -10.0, 10.0};
    p.t_final = 1.0;
    p.initial_condition = initial::Example1{};
    return p;
  }

  static FglParams example2(double alpha = 1.5, double beta = 1.5) {
    FglParams p;
    p.nu = 1.0;
    p.kappa = 1.0;
    p.eta = 0.5;
    p.xi = -5.0;
    p.gamma = 3.0;
    p.alpha = alpha;
    p.beta = beta;
    p.domain = {-8.0, 8.0, -8.0, 8.0};
    p.t_final = 1.0;
    p.initial_condition = initial::Example2{};
    return p;
  }
};

/// Uniform space-time discretization. Only interior nodes carry unknowns; the boundary is zero.
struct Grid {
  int n_x = 0;
  int n_y = 0;
  int m = 0;
  double h_x = 0.0;
  double h_y = 0.0;
  double tau = 0.0;
  RVector x;  // interior nodes x_1 .. x_{N_x-1}
  RVector y;

  Index rows() const { return n_x - 1; }
  Index cols() const { return n_y - 1; }

  static Grid make(const FglParams& params, int n_x, int n_y, int m) {
    if (n_x < 4 || n_y < 4) throw ParameterError("grid needs N_x, N_y >= 4");
    if (m < 1) throw ParameterError("time-step count M must be >= 1");
    const Domain& d = params.domain;
    if (!(d.x_left < d.x_right) || !(d.y_left < d.y_right))
      throw ParameterError("degenerate domain");
    if (!(params.t_final > 0.0)) throw ParameterError("t_final must be positive");
    Grid g;
    g.n_x = n_x;
    g.n_y = n_y;
    g.m = m;
    g.h_x = (d.x_right - d.x_left) / n_x;
    g.h_y = (d.y_right - d.y_left) / n_y;
    g.tau = params.t_final / m;
    g.x.resize(n_x - 1);
    g.y.resize(n_y - 1);
    for (int i = 1; i < n_x; ++i) g.x(i - 1) = d.x_left + i * g.h_x;
    for (int j = 1; j < n_y; ++j) g.y(j - 1) = d.y_left + j * g.h_y;
    return g;
  }

  static Grid square(const FglParams& params, int n, int m) { return make(params, n, n, m); }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline CMatrix rank_r_field(const initial::RankR& spec, const Domain& d, const Grid& grid) {
  std::mt19937_64 rng(spec.seed);
  const double lx = d.x_right - d.x_left;
  const double ly = d.y_right - d.y_left;
  CMatrix u = CMatrix::Zero(grid.rows(), grid.cols());
  for (int k = 0; k < spec.rank; ++k) {
    const double weight = std::ldexp(1.0, -k);
    const double cx = d.x_left + lx * (0.25 + 0.5 * uniform01(rng));
    const double cy = d.y_left + ly * (0.25 + 0.5 * uniform01(rng));
    const double wx = lx * (0.05 + 0.1 * uniform01(rng));
    const double wy = ly * (0.05 + 0.1 * uniform01(rng));
    const double px = 4.0 * uniform01(rng) - 2.0;
    const double py = 4.0 * uniform01(rng) - 2.0;
    CVector fx(grid.rows());
    CVector fy(grid.cols());
    for (Index i = 0; i < grid.rows(); ++i) {
      const double s = (grid.x(i) - cx) / wx;
      fx(i) = std::exp(-s * s) * std::polar(1.0, px * grid.x(i));
    }
    for (Index j = 0; j < grid.cols(); ++j) {
      const double s = (grid.y(j) - cy) / wy;
      fy(j) = std::exp(-s * s) * std::polar(1.0, py * grid.y(j));
    }
    u.noalias() += weight * fx * fy.transpose();
  }
  return u;
}

}  // namespace detail

/// Samples the initial condition on the interior nodes of `grid`.
inline ComplexField initial_field(const FglParams& params, const Grid& grid) {
  struct Sampler {
    const FglParams& p;
    const Grid& g;
    CMatrix operator()(const initial::Example1&) const {
      CMatrix u(g.rows(), g.cols());
      for (Index j = 0; j < g.cols(); ++j)
        for (Index i = 0; i < g.rows(); ++i) {
          const double x = g.x(i), y = g.y(j);
          u(i, j) = 2.0 / (std::cosh(x) * std::cosh(y)) * std::polar(1.0, 3.0 * (x + y));
        }
      return u;
    }
    CMatrix operator()(const initial::Example2&) const {
      CMatrix u(g.rows(), g.cols());
      for (Index j = 0; j < g.cols(); ++j)
        for (Index i = 0; i < g.rows(); ++i) {
          const double x = g.x(i), y = g.y(j);
          const double s0 = 1.0 / (std::exp(x + y) + std::exp(-(x + y)));
          u(i, j) = std::exp(-2.0 * (x * x + y * y)) * std::polar(1.0, s0);
        }
      return u;
    }
    CMatrix operator()(const initial::RankR& rr) const {
      if (rr.rank < 1) throw ParameterError("RankR initial condition needs rank >= 1");
      return detail::rank_r_field(rr, p.domain, g);
    }
    CMatrix operator()(const initial::Custom& c) const {
      if (c.samples.rows() != g.rows() || c.samples.cols() != g.cols())
        throw ShapeError("custom initial samples do not match the interior grid");
      return c.samples;
    }
  };
  return std::visit(Sampler{params, grid}, params.initial_condition);
}

inline std::string initial_condition_name(const InitialCondition& ic) {
  struct Namer {
    std::string operator()(const initial::Example1&) const { return "example1"; }
    std::string operator()(const initial::Example2&) const { return "example2"; }
    std::string operator()(const initial::RankR& r) const {
      return "rank_r(" + std::to_string(r.rank) + "," + std::to_string(r.seed) + ")";
    }
    std::string operator()(const initial::Custom&) const { return "custom"; }
  };
  return std::visit(Namer{}, ic);
}

}  // namespace fgl
