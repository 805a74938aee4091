#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace lagmc {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class ShapeKind { Disk, Ellipse, Fourier };

/// Nearest boundary point of a domain.
struct BoundaryProjection {
    double theta;            ///< polar parameter of the nearest point
    Vec2 point;
    double distance;         ///< |p - point|
    double signed_distance;  ///< positive inside
};

/// Smooth, uniformly convex planar domain, star-shaped about its polar origin:
/// boundary(theta) = origin + R(theta) (cos theta, sin theta).
///
/// Immutable after construction; construction fails with GeometryError when the
/// boundary curvature is not strictly positive at every sampled parameter.
class ConvexDomain {
public:
    static ConvexDomain disk(const Vec2& center, double radius);
    static ConvexDomain ellipse(const Vec2& center, const Vec2& semi_axes, double rotation);
    /// R(theta) = base_radius + sum_k cos_coeffs[k-1] cos(k theta) + sin_coeffs[k-1] sin(k theta).
    static ConvexDomain smooth_convex(const Vec2& origin, double base_radius, std::vector<double> cos_coeffs,
                                      std::vector<double> sin_coeffs);

    [[nodiscard]] ShapeKind kind() const noexcept { return kind_; }
    [[nodiscard]] const Vec2& origin() const noexcept { return origin_; }
    [[nodiscard]] const Vec2& barycenter() const noexcept { return barycenter_; }
    [[nodiscard]] double area() const noexcept { return area_; }
    [[nodiscard]] double curvature_min() const noexcept { return curvature_min_; }
    [[nodiscard]] double max_radius() const noexcept { return max_radius_; }
    /// Central second moments divided by the area.
    [[nodiscard]] const Mat2& covariance() const noexcept { return covariance_; }

    [[nodiscard]] double radius(double theta) const;
    [[nodiscard]] double radius_d1(double theta) const;
    [[nodiscard]] double radius_d2(double theta) const;

    [[nodiscard]] Vec2 point(double theta) const;
    [[nodiscard]] Vec2 tangent(double theta) const;         ///< d point / d theta
    [[nodiscard]] Vec2 second_tangent(double theta) const;  ///< d^2 point / d theta^2
    [[nodiscard]] double curvature(double theta) const;
    [[nodiscard]] Vec2 inward_normal(double theta) const;

    /// Polar parameter of a point (angle about the origin).
    [[nodiscard]] double parameter_of(const Vec2& p) const;
    /// Unit inward normal at a point already on the boundary.
    [[nodiscard]] Vec2 inward_normal_at(const Vec2& boundary_point) const;
    [[nodiscard]] bool contains(const Vec2& p) const;
    /// Newton projection with multistart; throws GeometryError if no seed converges.
    [[nodiscard]] BoundaryProjection project(const Vec2& p) const;

    /// Same shape with every length multiplied by s about the origin.
    [[nodiscard]] ConvexDomain scaled(double s) const;

    /// Short description, e.g. "disk(center=(0,0), radius=1)".
    [[nodiscard]] std::string describe() const;

private:
    ConvexDomain() = default;
    void finalize();

    ShapeKind kind_ = ShapeKind::Disk;
    Vec2 origin_ = Vec2::Zero();
    // Disk: radius. Ellipse: semi-axes and rotation. Fourier: base radius and coefficients.
    double radius_ = 1.0;
    Vec2 semi_axes_ = Vec2::Ones();
    double rotation_ = 0.0;
    std::vector<double> cos_coeffs_;
    std::vector<double> sin_coeffs_;

    Vec2 barycenter_ = Vec2::Zero();
    double area_ = 0.0;
    double curvature_min_ = 0.0;
    double max_radius_ = 0.0;
    Mat2 covariance_ = Mat2::Zero();
};

/// (|target| / |source|)^(1/n).
[[nodiscard]] double theta0(const ConvexDomain& source, const ConvexDomain& target, int n);

/// h, Dh and D^2h at a point.
struct DefiningValue {
    double value;
    Vec2 gradient;
    Mat2 hessian;
};

/// Concave defining function h = d - (boost/2) d^2 built from the signed distance d to
/// the boundary. |Dh| = 1 on the boundary and Dh there is the inward normal.
class DefiningFunction {
public:
    DefiningFunction(ConvexDomain domain, double concavity_boost, double theta)
        : domain_(std::move(domain)), boost_(concavity_boost), theta_(theta) {}

    [[nodiscard]] DefiningValue eval(const Vec2& p) const;
    [[nodiscard]] double value(const Vec2& p) const { return eval(p).value; }

    [[nodiscard]] const ConvexDomain& domain() const noexcept { return domain_; }
    [[nodiscard]] double concavity_boost() const noexcept { return boost_; }
    /// Measured uniform concavity constant (D^2h <= -theta I on the sample set).
    [[nodiscard]] double theta() const noexcept { return theta_; }

private:
    ConvexDomain domain_;
    double boost_;
    double theta_;
};

/// Builds h and measures theta over a 64x64 interior sample plus 512 boundary points,
/// refined by a local search from the worst samples.
/// Throws GeometryError when the measured theta is not positive.
[[nodiscard]] DefiningFunction defining_function(const ConvexDomain& domain, double concavity_boost);

/// Hessian of the signed distance at a point with nearest boundary parameter `theta`.
[[nodiscard]] Mat2 distance_hessian(const ConvexDomain& domain, const BoundaryProjection& proj);

}  // namespace lagmc
