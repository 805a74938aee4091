#pragma once

#include <Eigen/Dense>

namespace lagmc {

/// Eigen-decomposition of a symmetric 2x2 matrix.
/// Columns of `rotation` are the unit eigenvectors for (lo, hi); rotation is proper (det = +1).
struct Eig2 {
    double lo;
    double hi;
    Eigen::Matrix2d rotation;
};

/// Closed-form (trace, discriminant) decomposition. The discriminant is clamped at zero.
Eig2 eig2(const Eigen::Matrix2d& s);

/// Eigenvalues only, ascending. Cheaper than eig2 when vectors are not needed.
Eigen::Vector2d eigenvalues2(const Eigen::Matrix2d& s);

/// Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues ascending.
struct Eig3 {
    Eigen::Vector3d values;
    Eigen::Matrix3d vectors;
};

/// Trigonometric closed form for the eigenvalues; eigenvectors from cross products
/// of the shifted rows, with projector fallbacks for repeated eigenvalues.
Eig3 eig3(const Eigen::Matrix3d& s);

}  // namespace lagmc
