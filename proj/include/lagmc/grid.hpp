#pragma once

#include "lagmc/geometry.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace lagmc {

/// Finite-difference weights at one node. All five rows share the node list.
struct NodeStencil {
    std::vector<int> nodes;
    std::vector<double> gx, gy;
    std::vector<double> hxx, hxy, hyy;
};

/// Boundary-fitted polar grid x(rho, theta) = origin + rho R(theta) (cos theta, sin theta).
///
/// Node 0 is the pole (rho = 0), shared by every theta column. Ring i >= 1 holds
/// n_theta nodes; ring n_rho - 1 lies on the boundary. Total node count is
/// (n_rho - 1) n_theta + 1.
class MappedGrid {
public:
    /// n_rho >= 8, n_theta >= 16 and even; throws GeometryError otherwise.
    static std::shared_ptr<const MappedGrid> build(const ConvexDomain& domain, int n_rho, int n_theta);

    [[nodiscard]] const ConvexDomain& domain() const noexcept { return domain_; }
    [[nodiscard]] int n_rho() const noexcept { return n_rho_; }
    [[nodiscard]] int n_theta() const noexcept { return n_theta_; }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(nodes_.size()); }

    [[nodiscard]] double rho(int i) const noexcept { return static_cast<double>(i) / (n_rho_ - 1); }
    [[nodiscard]] double theta(int j) const noexcept;
    /// Node index of (ring i, column j); j is taken modulo n_theta, i = 0 is the pole.
    [[nodiscard]] int index(int i, int j) const noexcept;
    [[nodiscard]] int ring_of(int k) const noexcept;
    [[nodiscard]] int column_of(int k) const noexcept;

    [[nodiscard]] const Vec2& node(int k) const noexcept { return nodes_[k]; }
    [[nodiscard]] const std::vector<Vec2>& nodes() const noexcept { return nodes_; }
    /// d x / d rho and d x / d theta at node k (exact map derivatives).
    [[nodiscard]] const Vec2& x_rho(int k) const noexcept { return x_rho_[k]; }
    [[nodiscard]] const Vec2& x_theta(int k) const noexcept { return x_theta_[k]; }
    /// det dx/d(rho, theta) = rho R(theta)^2.
    [[nodiscard]] double jacobian(int k) const noexcept { return jacobian_[k]; }

    [[nodiscard]] bool is_boundary(int k) const noexcept { return ring_of(k) == n_rho_ - 1; }
    [[nodiscard]] const std::vector<int>& boundary_nodes() const noexcept { return boundary_; }
    [[nodiscard]] const std::vector<int>& interior_nodes() const noexcept { return interior_; }

    /// Quadrature weights: trapezoid in rho times periodic trapezoid in theta, times the Jacobian.
    [[nodiscard]] const Eigen::VectorXd& quadrature_weights() const noexcept { return weights_; }
    [[nodiscard]] const NodeStencil& stencil(int k) const noexcept { return stencils_[k]; }

    /// Largest physical radial spacing, max R / (n_rho - 1).
    [[nodiscard]] double spacing() const noexcept { return spacing_; }

private:
    MappedGrid(const ConvexDomain& domain, int n_rho, int n_theta) : domain_(domain), n_rho_(n_rho), n_theta_(n_theta) {}
    void build_stencils();

    ConvexDomain domain_;
    int n_rho_;
    int n_theta_;
    std::vector<Vec2> nodes_;
    std::vector<Vec2> x_rho_;
    std::vector<Vec2> x_theta_;
    std::vector<double> jacobian_;
    std::vector<int> boundary_;
    std::vector<int> interior_;
    Eigen::VectorXd weights_;
    std::vector<NodeStencil> stencils_;
    double spacing_ = 0.0;
};

/// Nodal values on a grid.
class ScalarField {
public:
    /// Throws std::invalid_argument on a size mismatch or a non-finite value.
    ScalarField(std::shared_ptr<const MappedGrid> grid, Eigen::VectorXd values);
    static ScalarField from_function(std::shared_ptr<const MappedGrid> grid, const std::function<double(const Vec2&)>& f);

    [[nodiscard]] const MappedGrid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const std::shared_ptr<const MappedGrid>& grid_ptr() const noexcept { return grid_; }
    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
    [[nodiscard]] double operator[](int k) const noexcept { return values_[k]; }

private:
    std::shared_ptr<const MappedGrid> grid_;
    Eigen::VectorXd values_;
};

[[nodiscard]] std::vector<Vec2> gradient(const MappedGrid& grid, const Eigen::VectorXd& u);
[[nodiscard]] std::vector<Mat2> hessian(const MappedGrid& grid, const Eigen::VectorXd& u);
[[nodiscard]] inline std::vector<Vec2> gradient(const ScalarField& f) { return gradient(f.grid(), f.values()); }
[[nodiscard]] inline std::vector<Mat2> hessian(const ScalarField& f) { return hessian(f.grid(), f.values()); }

/// u_{ijk} for fixed direction k in {0, 1}: gradient stencils applied to the Hessian entries.
[[nodiscard]] std::vector<Mat2> third_derivatives(const MappedGrid& grid, const Eigen::VectorXd& u, int k);
[[nodiscard]] inline std::vector<Mat2> third_derivatives(const ScalarField& f, int k) {
    return third_derivatives(f.grid(), f.values(), k);
}

[[nodiscard]] double integrate(const MappedGrid& grid, const Eigen::VectorXd& v);
[[nodiscard]] inline double integrate(const ScalarField& f) { return integrate(f.grid(), f.values()); }
[[nodiscard]] double integrate_det_hessian(const MappedGrid& grid, const Eigen::VectorXd& u);
[[nodiscard]] inline double integrate_det_hessian(const ScalarField& f) {
    return integrate_det_hessian(f.grid(), f.values());
}

/// Linear combination of nodal values reproducing a field at an arbitrary point.
struct InterpolationWeights {
    std::vector<std::pair<int, double>> terms;
    /// Distance outside the domain (0 inside); extrapolated values beyond this are unreliable.
    double outside = 0.0;

    [[nodiscard]] double apply(const Eigen::VectorXd& v) const {
        double s = 0.0;
        for (const auto& [k, w] : terms) s += w * v[k];
        return s;
    }
};

/// Cubic interpolation in the mapped coordinates: periodic Lagrange in theta on each ring,
/// then Lagrange along the physical line through the pole.
class FieldInterpolator {
public:
    explicit FieldInterpolator(std::shared_ptr<const MappedGrid> grid) : grid_(std::move(grid)) {}

    [[nodiscard]] InterpolationWeights weights(const Vec2& p) const;
    [[nodiscard]] double operator()(const Eigen::VectorXd& v, const Vec2& p) const { return weights(p).apply(v); }

private:
    std::shared_ptr<const MappedGrid> grid_;
};

}  // namespace lagmc
