#include "lagmc/geometry.hpp"

#include "lagmc/eig.hpp"
#include "lagmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace lagmc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kCurvatureSamples = 2048;
constexpr int kMomentSamples = 4096;
constexpr int kProjectionSeeds = 8;
constexpr int kProjectionMaxIter = 50;

Vec2 unit(double theta) { return {std::cos(theta), std::sin(theta)}; }
Vec2 unit_perp(double theta) { return {-std::sin(theta), std::cos(theta)}; }

double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    return t;
}

}  // namespace

ConvexDomain ConvexDomain::disk(const Vec2& center, double radius) {
    if (!(radius > 0.0)) throw GeometryError("disk: radius must be positive");
    ConvexDomain d;
    d.kind_ = ShapeKind::Disk;
    d.origin_ = center;
    d.radius_ = radius;
    d.finalize();
    return d;
}

ConvexDomain ConvexDomain::ellipse(const Vec2& center, const Vec2& semi_axes, double rotation) {
    if (!(semi_axes.x() > 0.0) || !(semi_axes.y() > 0.0)) throw GeometryError("ellipse: semi-axes must be positive");
    ConvexDomain d;
    d.kind_ = ShapeKind::Ellipse;
    d.origin_ = center;
    d.semi_axes_ = semi_axes;
    d.rotation_ = rotation;
    d.finalize();
    return d;
}

ConvexDomain ConvexDomain::smooth_convex(const Vec2& origin, double base_radius, std::vector<double> cos_coeffs,
                                         std::vector<double> sin_coeffs) {
    if (!(base_radius > 0.0)) throw GeometryError("smooth_convex: base radius must be positive");
    ConvexDomain d;
    d.kind_ = ShapeKind::Fourier;
    d.origin_ = origin;
    d.radius_ = base_radius;
    d.cos_coeffs_ = std::move(cos_coeffs);
    d.sin_coeffs_ = std::move(sin_coeffs);
    d.finalize();
    return d;
}

double ConvexDomain::radius(double theta) const {
    switch (kind_) {
        case ShapeKind::Disk: return radius_;
        case ShapeKind::Ellipse: {
            const double phi = theta - rotation_;
            const double c = std::cos(phi) / semi_axes_.x();
            const double s = std::sin(phi) / semi_axes_.y();
            return 1.0 / std::sqrt(c * c + s * s);
        }
        case ShapeKind::Fourier: {
            double r = radius_;
            for (std::size_t k = 0; k < cos_coeffs_.size(); ++k) r += cos_coeffs_[k] * std::cos((k + 1) * theta);
            for (std::size_t k = 0; k < sin_coeffs_.size(); ++k) r += sin_coeffs_[k] * std::sin((k + 1) * theta);
            return r;
        }
    }
    return radius_;
}

double ConvexDomain::radius_d1(double theta) const {
    switch (kind_) {
        case ShapeKind::Disk: return 0.0;
        case ShapeKind::Ellipse: {
            // R = q^{-1/2}, q = cos^2/a^2 + sin^2/b^2
            const double phi = theta - rotation_;
            const double ia2 = 1.0 / (semi_axes_.x() * semi_axes_.x());
            const double ib2 = 1.0 / (semi_axes_.y() * semi_axes_.y());
            const double q = std::cos(phi) * std::cos(phi) * ia2 + std::sin(phi) * std::sin(phi) * ib2;
            const double dq = std::sin(2.0 * phi) * (ib2 - ia2);
            return -0.5 * std::pow(q, -1.5) * dq;
        }
        case ShapeKind::Fourier: {
            double r = 0.0;
            for (std::size_t k = 0; k < cos_coeffs_.size(); ++k) {
                const double m = static_cast<double>(k + 1);
                r -= m * cos_coeffs_[k] * std::sin(m * theta);
            }
            for (std::size_t k = 0; k < sin_coeffs_.size(); ++k) {
                const double m = static_cast<double>(k + 1);
                r += m * sin_coeffs_[k] * std::cos(m * theta);
            }
            return r;
        }
    }
    return 0.0;
}

double ConvexDomain::radius_d2(double theta) const {
    switch (kind_) {
        case ShapeKind::Disk: return 0.0;
        case ShapeKind::Ellipse: {
            const double phi = theta - rotation_;
            const double ia2 = 1.0 / (semi_axes_.x() * semi_axes_.x());
            const double ib2 = 1.0 / (semi_axes_.y() * semi_axes_.y());
            const double q = std::cos(phi) * std::cos(phi) * ia2 + std::sin(phi) * std::sin(phi) * ib2;
            const double dq = std::sin(2.0 * phi) * (ib2 - ia2);
            const double ddq = 2.0 * std::cos(2.0 * phi) * (ib2 - ia2);
            return 0.75 * std::pow(q, -2.5) * dq * dq - 0.5 * std::pow(q, -1.5) * ddq;
        }
        case ShapeKind::Fourier: {
            double r = 0.0;
            for (std::size_t k = 0; k < cos_coeffs_.size(); ++k) {
                const double m = static_cast<double>(k + 1);
                r -= m * m * cos_coeffs_[k] * std::cos(m * theta);
            }
            for (std::size_t k = 0; k < sin_coeffs_.size(); ++k) {
                const double m = static_cast<double>(k + 1);
                r -= m * m * sin_coeffs_[k] * std::sin(m * theta);
            }
            return r;
        }
    }
    return 0.0;
}

Vec2 ConvexDomain::point(double theta) const { return origin_ + radius(theta) * unit(theta); }

Vec2 ConvexDomain::tangent(double theta) const {
    return radius_d1(theta) * unit(theta) + radius(theta) * unit_perp(theta);
}

Vec2 ConvexDomain::second_tangent(double theta) const {
    const double r = radius(theta);
    return (radius_d2(theta) - r) * unit(theta) + 2.0 * radius_d1(theta) * unit_perp(theta);
}

double ConvexDomain::curvature(double theta) const {
    const double r = radius(theta);
    const double r1 = radius_d1(theta);
    const double r2 = radius_d2(theta);
    const double speed2 = r * r + r1 * r1;
    return (r * r + 2.0 * r1 * r1 - r * r2) / (speed2 * std::sqrt(speed2));
}

Vec2 ConvexDomain::inward_normal(double theta) const {
    const Vec2 t = tangent(theta).normalized();
    return {-t.y(), t.x()};
}

double ConvexDomain::parameter_of(const Vec2& p) const {
    const Vec2 rel = p - origin_;
    return wrap_angle(std::atan2(rel.y(), rel.x()));
}

Vec2 ConvexDomain::inward_normal_at(const Vec2& boundary_point) const {
    return inward_normal(parameter_of(boundary_point));
}

bool ConvexDomain::contains(const Vec2& p) const {
    const Vec2 rel = p - origin_;
    return rel.norm() < radius(parameter_of(p));
}

BoundaryProjection ConvexDomain::project(const Vec2& p) const {
    if (!p.allFinite()) throw GeometryError("project: point is not finite");
    if (kind_ == ShapeKind::Disk) {
        const double theta = parameter_of(p);
        BoundaryProjection out;
        out.theta = theta;
        out.point = point(theta);
        out.distance = (p - out.point).norm();
        out.signed_distance = radius_ - (p - origin_).norm();
        return out;
    }
    const double base = parameter_of(p);
    const double length_scale = max_radius_;
    double best_g = std::numeric_limits<double>::infinity();
    double best_theta = base;
    bool any = false;
    double worst_residual = 0.0;
    for (int s = 0; s < kProjectionSeeds; ++s) {
        double theta = base + kTwoPi * s / kProjectionSeeds;
        bool converged = false;
        double g1 = 0.0;
        for (int it = 0; it < kProjectionMaxIter; ++it) {
            const Vec2 diff = point(theta) - p;
            const Vec2 d1 = tangent(theta);
            const Vec2 d2 = second_tangent(theta);
            g1 = diff.dot(d1);
            const double g2 = d1.squaredNorm() + diff.dot(d2);
            double step = g2 > 0.0 ? -g1 / g2 : (g1 > 0.0 ? -0.1 : 0.1);
            step = std::clamp(step, -0.5, 0.5);
            theta += step;
            if (std::abs(step) < 1e-15 || std::abs(g1) < 1e-15 * length_scale * length_scale) {
                converged = true;
                break;
            }
        }
        if (!converged && std::abs(g1) > 1e-11 * length_scale * length_scale) {
            worst_residual = std::max(worst_residual, std::abs(g1));
            continue;
        }
        const double g = 0.5 * (point(theta) - p).squaredNorm();
        if (g < best_g) {
            best_g = g;
            best_theta = theta;
        }
        any = true;
    }
    if (!any) {
        std::ostringstream os;
        os << "project: Newton projection failed to converge in " << kProjectionMaxIter << " iterations for p = ("
           << p.x() << ", " << p.y() << "), stationarity residual " << worst_residual;
        throw GeometryError(os.str());
    }
    BoundaryProjection out;
    out.theta = wrap_angle(best_theta);
    out.point = point(out.theta);
    out.distance = (p - out.point).norm();
    const double side = (p - out.point).dot(inward_normal(out.theta));
    out.signed_distance = side >= 0.0 ? out.distance : -out.distance;
    return out;
}

ConvexDomain ConvexDomain::scaled(double s) const {
    if (!(s > 0.0)) throw GeometryError("scaled: factor must be positive");
    ConvexDomain d = *this;
    d.radius_ *= s;
    d.semi_axes_ *= s;
    for (double& c : d.cos_coeffs_) c *= s;
    for (double& c : d.sin_coeffs_) c *= s;
    d.finalize();
    return d;
}

std::string ConvexDomain::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
        case ShapeKind::Disk:
            os << "disk(center=(" << origin_.x() << "," << origin_.y() << "), radius=" << radius_ << ")";
            break;
        case ShapeKind::Ellipse:
            os << "ellipse(center=(" << origin_.x() << "," << origin_.y() << "), semi_axes=(" << semi_axes_.x() << ","
               << semi_axes_.y() << "), rotation=" << rotation_ << ")";
            break;
        case ShapeKind::Fourier:
            os << "fourier(origin=(" << origin_.x() << "," << origin_.y() << "), base_radius=" << radius_
               << ", modes=" << std::max(cos_coeffs_.size(), sin_coeffs_.size()) << ")";
            break;
    }
    return os.str();
}

void ConvexDomain::finalize() {
    double kmin = std::numeric_limits<double>::infinity();
    double kmin_theta = 0.0;
    double rmax = 0.0;
    for (int i = 0; i < kCurvatureSamples; ++i) {
        const double t = kTwoPi * i / kCurvatureSamples;
        const double r = radius(t);
        if (!(r > 0.0)) {
            std::ostringstream os;
            os << "domain is not star-shaped: R(" << t << ") = " << r;
            throw GeometryError(os.str());
        }
        rmax = std::max(rmax, r);
        const double k = curvature(t);
        if (!(k > 0.0)) {
            std::ostringstream os;
            os << "domain is not uniformly convex: curvature " << k << " at t = " << t;
            throw GeometryError(os.str());
        }
        if (k < kmin) {
            kmin = k;
            kmin_theta = t;
        }
    }
    // Golden-section refinement of the sampled minimum.
    const double h = kTwoPi / kCurvatureSamples;
    double lo = kmin_theta - h;
    double hi = kmin_theta + h;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo);
    double x2 = lo + g * (hi - lo);
    double f1 = curvature(x1);
    double f2 = curvature(x2);
    for (int it = 0; it < 60; ++it) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = curvature(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = curvature(x2);
        }
    }
    curvature_min_ = std::min({kmin, f1, f2});
    max_radius_ = rmax;

    // Moments by the radial formulas: dA = rho R^2 drho dtheta, integrated exactly in rho.
    double area = 0.0;
    Vec2 first = Vec2::Zero();
    Mat2 second = Mat2::Zero();
    for (int i = 0; i < kMomentSamples; ++i) {
        const double t = kTwoPi * i / kMomentSamples;
        const double r = radius(t);
        const Vec2 e = unit(t);
        area += 0.5 * r * r;
        first += (r * r * r / 3.0) * e;
        second += (r * r * r * r / 4.0) * (e * e.transpose());
    }
    const double w = kTwoPi / kMomentSamples;
    area *= w;
    first *= w;
    second *= w;
    switch (kind_) {
        case ShapeKind::Disk: area_ = std::numbers::pi * radius_ * radius_; break;
        case ShapeKind::Ellipse: area_ = std::numbers::pi * semi_axes_.x() * semi_axes_.y(); break;
        case ShapeKind::Fourier: area_ = area; break;
    }
    const Vec2 rel_centroid = first / area;
    barycenter_ = origin_ + rel_centroid;
    if (kind_ != ShapeKind::Fourier) barycenter_ = origin_;
    covariance_ = second / area - rel_centroid * rel_centroid.transpose();
    if (kind_ != ShapeKind::Fourier) covariance_ = 0.5 * (covariance_ + covariance_.transpose());
}

double theta0(const ConvexDomain& source, const ConvexDomain& target, int n) {
    if (!(source.area() > 0.0) || !(target.area() > 0.0)) throw GeometryError("theta0: areas must be positive");
    return std::pow(target.area() / source.area(), 1.0 / n);
}

Mat2 distance_hessian(const ConvexDomain& domain, const BoundaryProjection& proj) {
    const double k = domain.curvature(proj.theta);
    const Vec2 t = domain.tangent(proj.theta).normalized();
    const double denom = std::max(1.0 - k * proj.signed_distance, 1e-12);
    return -(k / denom) * (t * t.transpose());
}

DefiningValue DefiningFunction::eval(const Vec2& p) const {
    const BoundaryProjection proj = domain_.project(p);
    const double d = proj.signed_distance;
    const double k = domain_.curvature(proj.theta);
    const Vec2 n = domain_.inward_normal(proj.theta);
    const Vec2 t(n.y(), -n.x());
    const double num = 1.0 - boost_ * d;
    const double den = 1.0 - k * d;
    // Tangential eigenvalue -(1 - boost d) k / (1 - k d); at a focal point both factors can vanish.
    double ratio;
    if (den > 1e-10) {
        ratio = num / den;
    } else if (std::abs(num) < 1e-8) {
        ratio = boost_ / k;
    } else {
        ratio = num / 1e-10;
    }
    DefiningValue out;
    out.value = d - 0.5 * boost_ * d * d;
    out.gradient = num * n;
    out.hessian = -(ratio * k) * (t * t.transpose()) - boost_ * (n * n.transpose());
    return out;
}

DefiningFunction defining_function(const ConvexDomain& domain, double concavity_boost) {
    if (!(concavity_boost >= 0.0)) throw GeometryError("defining_function: concavity boost must be >= 0");
    DefiningFunction h(domain, concavity_boost, 0.0);
    const auto concavity = [&](const Vec2& p) { return -eigenvalues2(h.eval(p).hessian)(1); };

    struct Sample {
        double value;
        Vec2 point;
    };
    std::vector<Sample> samples;
    constexpr int kBoundary = 512;
    for (int i = 0; i < kBoundary; ++i) {
        const Vec2 p = domain.point(kTwoPi * i / kBoundary);
        samples.push_back({concavity(p), p});
    }
    constexpr int kSide = 64;
    const double r = domain.max_radius();
    const double spacing = 2.0 * r / kSide;
    for (int i = 0; i < kSide; ++i) {
        for (int j = 0; j < kSide; ++j) {
            const Vec2 p = domain.origin() + Vec2(-r + spacing * (i + 0.5), -r + spacing * (j + 0.5));
            if (domain.contains(p)) samples.push_back({concavity(p), p});
        }
    }
    std::sort(samples.begin(), samples.end(), [](const Sample& x, const Sample& y) { return x.value < y.value; });
    double worst = samples.front().value;

    // Compass search from the worst samples tightens the sampled infimum.
    const std::size_t starts = std::min<std::size_t>(8, samples.size());
    for (std::size_t s = 0; s < starts; ++s) {
        Vec2 p = samples[s].point;
        double v = samples[s].value;
        for (double step = spacing; step > 1e-7 * r; step *= 0.5) {
            bool moved = true;
            while (moved) {
                moved = false;
                for (const Vec2& dir : {Vec2(1, 0), Vec2(-1, 0), Vec2(0, 1), Vec2(0, -1)}) {
                    Vec2 q = p + step * dir;
                    if (!domain.contains(q)) {
                        const BoundaryProjection pr = domain.project(q);
                        q = pr.point;
                    }
                    const double vq = concavity(q);
                    if (vq < v) {
                        v = vq;
                        p = q;
                        moved = true;
                    }
                }
            }
        }
        worst = std::min(worst, v);
    }
    if (!(worst > 0.0)) {
        std::ostringstream os;
        os << "defining_function: measured concavity " << worst
           << " is not positive; increase the concavity boost (currently " << concavity_boost << ")";
        throw GeometryError(os.str());
    }
    return DefiningFunction(domain, concavity_boost, worst);
}

}  // namespace lagmc
