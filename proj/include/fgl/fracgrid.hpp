#pragma once

#include <cmath>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fgl/error.hpp"
#include "fgl/params.hpp"
#include "fgl/types.hpp"

namespace fgl {

/// Symmetric half g_0 .. g_K of the fractional centered difference stencil (g_{-k} = g_k).
struct FracStencil {
  double mu = 2.0;
  std::vector<double> coeffs;

  double operator[](std::size_t k) const { return coeffs[k]; }
  std::size_t size() const { return coeffs.size(); }

  /// g_0 + 2 sum_{k=1}^{K} g_k, the stencil symbol at zero frequency truncated at K.
  double partial_sum(std::size_t k_max) const {
    double s = 0.0;
    for (std::size_t k = std::min(k_max, coeffs.size() - 1); k >= 1; --k) s += coeffs[k];
    return coeffs[0] + 2.0 * s;
  }
};

/// Coefficients g_k^mu = (-1)^k Gamma(1+mu) / (Gamma(mu/2-k+1) Gamma(mu/2+k+1)), k = 0..count.
///
/// Evaluated with the ratio recurrence g_{k+1} = g_k (k - mu/2) / (k + 1 + mu/2), which stays
/// finite where the Gamma factors overflow (k around 170). mu = 2 yields the classical
/// [2, -1, 0, ...] second-difference stencil.
inline FracStencil stencil_coeffs(double mu, int count) {
  if (!(mu > 1.0 && mu <= 2.0)) throw ParameterError("stencil order mu must lie in (1, 2]");
  if (count < 1) throw ArgumentError("stencil needs at least one off-diagonal coefficient");
  FracStencil st;
  st.mu = mu;
  st.coeffs.resize(static_cast<std::size_t>(count) + 1);
  const double half = 0.5 * mu;
  const double g0 = std::tgamma(1.0 + mu) / (std::tgamma(half + 1.0) * std::tgamma(half + 1.0));
  st.coeffs[0] = g0;
  for (int k = 0; k < count; ++k)
    st.coeffs[k + 1] = st.coeffs[k] * (k - half) / (k + 1.0 + half);
  return st;
}

enum class Axis { X, Y };
enum class Side { Left, Right };

namespace detail {

/// Smallest 2^a 3^b 5^c that is >= n.
inline Index efficient_fft_length(Index n) {
  Index best = 1;
  while (best < n) best *= 2;
  for (Index p5 = 1; p5 < best; p5 *= 5)
    for (Index p35 = p5; p35 < best; p35 *= 3) {
      Index v = p35;
      while (v < n) v *= 2;
      best = std::min(best, v);
    }
  return best;
}

}  // namespace detail

/// One-axis discrete Riesz derivative: complex symmetric Toeplitz matrix with first column
/// -(nu + i eta) / h^mu [g_0, ..., g_{n-1}]. Applied in O(n log n) per vector through the
/// circulant embedding of length fft_length() >= 2n - 1.
class FracOperator {
 public:
  FracOperator() = default;

  /// Low-level constructor; `mu` may be 2 for classical-limit checks.
  FracOperator(Axis axis, Index n, double h, double mu, Complex diffusion)
      : axis_(axis), n_(n), h_(h), mu_(mu), diffusion_(diffusion) {
    if (n < 1) throw ArgumentError("operator size must be positive");
    if (!(h > 0.0)) throw ParameterError("mesh width must be positive");
    const FracStencil st = stencil_coeffs(mu, static_cast<int>(std::max<Index>(n - 1, 1)));
    const Complex scale = -diffusion / std::pow(h, mu);
    first_column_.resize(n);
    for (Index k = 0; k < n; ++k) first_column_(k) = scale * st[static_cast<std::size_t>(k)];
    build_symbol();
  }

  Axis axis() const { return axis_; }
  Index size() const { return n_; }
  double mesh_width() const { return h_; }
  double order() const { return mu_; }
  Complex diffusion() const { return diffusion_; }
  const CVector& first_column() const { return first_column_; }
  const CVector& fft_symbol() const { return symbol_; }
  Index fft_length() const { return symbol_.size(); }

  CMatrix dense() const {
    CMatrix a(n_, n_);
    for (Index j = 0; j < n_; ++j)
      for (Index i = 0; i < n_; ++i) a(i, j) = first_column_(std::abs(i - j));
    return a;
  }

  /// Left: A * u.  Right: u * A (uses A^T = A).
  CMatrix apply(const CMatrix& u, Side side) const {
    if (side == Side::Left) {
      if (u.rows() != n_) throw ShapeError("left application: operator size != row count");
      return apply_columns(u);
    }
    if (u.cols() != n_) throw ShapeError("right application: operator size != column count");
    return apply_columns(u.transpose()).transpose();
  }

  CVector apply(const CVector& v) const {
    if (v.size() != n_) throw ShapeError("operator size != vector length");
    return apply_columns(v);
  }

 private:
  void build_symbol() {
    const Index len = detail::efficient_fft_length(2 * n_ - 1);
    std::vector<Complex> c(static_cast<std::size_t>(len), Complex(0.0, 0.0));
    for (Index k = 0; k < n_; ++k) c[k] = first_column_(k);
    for (Index k = 1; k < n_; ++k) c[len - k] = first_column_(k);
    std::vector<Complex> spec;
    Eigen::FFT<double> fft;
    fft.fwd(spec, c);
    symbol_ = Eigen::Map<const CVector>(spec.data(), len);
  }

  CMatrix apply_columns(const CMatrix& u) const {
    const Index len = symbol_.size();
    CMatrix out(n_, u.cols());
    Eigen::FFT<double> fft;
    std::vector<Complex> buf(static_cast<std::size_t>(len));
    std::vector<Complex> spec;
    std::vector<Complex> back;
    for (Index c = 0; c < u.cols(); ++c) {
      std::fill(buf.begin(), buf.end(), Complex(0.0, 0.0));
      for (Index i = 0; i < n_; ++i) buf[i] = u(i, c);
      fft.fwd(spec, buf);
      for (Index k = 0; k < len; ++k) spec[k] *= symbol_(k);
      fft.inv(back, spec);
      for (Index i = 0; i < n_; ++i) out(i, c) = back[i];
    }
    return out;
  }

  Axis axis_ = Axis::X;
  Index n_ = 0;
  double h_ = 1.0;
  double mu_ = 2.0;
  Complex diffusion_{1.0, 0.0};
  CVector first_column_;
  CVector symbol_;
};

/// A_x (size N_x - 1, order alpha) or A_y (size N_y - 1, order beta) for the given problem.
inline FracOperator build_operator(const FglParams& params, const Grid& grid, Axis axis) {
  params.validate();
  const Complex diffusion(params.nu, params.eta);
  if (axis == Axis::X) return FracOperator(Axis::X, grid.rows(), grid.h_x, params.alpha, diffusion);
  return FracOperator(Axis::Y, grid.cols(), grid.h_y, params.beta, diffusion);
}

inline ComplexField apply_operator(const FracOperator& op, const ComplexField& field, Side side) {
  return op.apply(field, side);
}

}  // namespace fgl
