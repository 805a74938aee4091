#include "lagmc/eig.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lagmc {

Eigen::Vector2d eigenvalues2(const Eigen::Matrix2d& s) {
    const double mean = 0.5 * (s(0, 0) + s(1, 1));
    const double half_diff = 0.5 * (s(0, 0) - s(1, 1));
    const double off = 0.5 * (s(0, 1) + s(1, 0));
    const double disc = std::sqrt(std::max(0.0, half_diff * half_diff + off * off));
    return {mean - disc, mean + disc};
}

Eig2 eig2(const Eigen::Matrix2d& s) {
    const double off = 0.5 * (s(0, 1) + s(1, 0));
    const Eigen::Vector2d ev = eigenvalues2(s);
    // Angle of the eigenvector belonging to the larger eigenvalue.
    const double phi = 0.5 * std::atan2(2.0 * off, s(0, 0) - s(1, 1));
    const double c = std::cos(phi);
    const double sn = std::sin(phi);
    Eig2 out;
    out.lo = ev(0);
    out.hi = ev(1);
    // lo-vector is the hi-vector rotated by -90 degrees, so det(rotation) = +1.
    out.rotation.col(0) = Eigen::Vector2d(sn, -c);
    out.rotation.col(1) = Eigen::Vector2d(c, sn);
    return out;
}

namespace {

Eigen::Vector3d null_vector(const Eigen::Matrix3d& shifted) {
    // Largest cross product of two rows spans the null space of a rank-2 matrix.
    const Eigen::Vector3d r0 = shifted.row(0);
    const Eigen::Vector3d r1 = shifted.row(1);
    const Eigen::Vector3d r2 = shifted.row(2);
    Eigen::Vector3d best = r0.cross(r1);
    double best_norm = best.squaredNorm();
    for (const Eigen::Vector3d& cand : {Eigen::Vector3d(r0.cross(r2)), Eigen::Vector3d(r1.cross(r2))}) {
        const double nn = cand.squaredNorm();
        if (nn > best_norm) {
            best = cand;
            best_norm = nn;
        }
    }
    return best / std::sqrt(best_norm);
}

Eigen::Vector3d any_orthogonal(const Eigen::Vector3d& v) {
    Eigen::Vector3d trial = std::abs(v(0)) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    Eigen::Vector3d w = trial - trial.dot(v) * v;
    return w.normalized();
}

}  // namespace

Eig3 eig3(const Eigen::Matrix3d& a) {
    const Eigen::Matrix3d s = 0.5 * (a + a.transpose());
    Eig3 out;
    const double p1 = s(0, 1) * s(0, 1) + s(0, 2) * s(0, 2) + s(1, 2) * s(1, 2);
    const double q = s.trace() / 3.0;
    const double p2 = (s(0, 0) - q) * (s(0, 0) - q) + (s(1, 1) - q) * (s(1, 1) - q) +
                      (s(2, 2) - q) * (s(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const double scale = std::max({std::abs(s(0, 0)), std::abs(s(1, 1)), std::abs(s(2, 2)), std::sqrt(p1), 1e-300});
    if (p <= 1e-14 * scale) {
        out.values = Eigen::Vector3d::Constant(q);
        out.vectors = Eigen::Matrix3d::Identity();
        return out;
    }
    const Eigen::Matrix3d b = (s - q * Eigen::Matrix3d::Identity()) / p;
    const double r = std::clamp(0.5 * b.determinant(), -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double hi = q + 2.0 * p * std::cos(phi);
    const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    const double mid = 3.0 * q - hi - lo;
    out.values = Eigen::Vector3d(lo, mid, hi);

    const double gap_lo = mid - lo;
    const double gap_hi = hi - mid;
    const double tol = 1e-10 * scale;
    const auto shifted = [&](double lam) { return Eigen::Matrix3d(s - lam * Eigen::Matrix3d::Identity()); };
    if (gap_lo > tol && gap_hi > tol) {
        const Eigen::Vector3d v0 = null_vector(shifted(lo));
        const Eigen::Vector3d v2 = null_vector(shifted(hi));
        Eigen::Vector3d v1 = v2.cross(v0);
        out.vectors.col(0) = v0;
        out.vectors.col(1) = v1.normalized();
        out.vectors.col(2) = v2;
    } else if (gap_lo <= tol) {
        // lo ~ mid: hi is simple.
        const Eigen::Vector3d v2 = null_vector(shifted(hi));
        const Eigen::Vector3d v0 = any_orthogonal(v2);
        out.vectors.col(0) = v0;
        out.vectors.col(1) = v2.cross(v0);
        out.vectors.col(2) = v2;
    } else {
        const Eigen::Vector3d v0 = null_vector(shifted(lo));
        const Eigen::Vector3d v1 = any_orthogonal(v0);
        out.vectors.col(0) = v0;
        out.vectors.col(1) = v1;
        out.vectors.col(2) = v0.cross(v1);
    }
    return out;
}

}  // namespace lagmc
