#pragma once

#include <complex>

#include <Eigen/Dense>

namespace fgl {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Interior solution matrix U, rows indexed by x_i (1 <= i <= N_x-1), columns by y_j.
using ComplexField = CMatrix;

inline bool all_finite(const CMatrix& m) { return m.allFinite(); }

}  // namespace fgl
