#include "lagmc/grid.hpp"

#include "lagmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace lagmc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct LocalNode {
    int k;
    double s;  // logical radial offset
    double t;  // logical angular offset
};

// Rows of derivative functionals on the quadratic part of a basis: gx, gy, hxx, hxy, hyy.
std::array<Eigen::VectorXd, 5> derivative_rows(int basis_size, double scale) {
    std::array<Eigen::VectorXd, 5> d;
    for (auto& v : d) v = Eigen::VectorXd::Zero(basis_size);
    d[0](1) = 1.0 / scale;
    d[1](2) = 1.0 / scale;
    d[2](3) = 2.0 / (scale * scale);
    d[3](4) = 1.0 / (scale * scale);
    d[4](5) = 2.0 / (scale * scale);
    return d;
}

void physical_quadratics(const Vec2& x, Eigen::MatrixXd& v, int r) {
    v(r, 0) = 1.0;
    v(r, 1) = x.x();
    v(r, 2) = x.y();
    v(r, 3) = x.x() * x.x();
    v(r, 4) = x.x() * x.y();
    v(r, 5) = x.y() * x.y();
}

NodeStencil assemble(const std::vector<int>& nodes, const std::array<Eigen::VectorXd, 5>& w) {
    NodeStencil st;
    st.nodes = nodes;
    const auto copy = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    st.gx = copy(w[0]);
    st.gy = copy(w[1]);
    st.hxx = copy(w[2]);
    st.hxy = copy(w[3]);
    st.hyy = copy(w[4]);
    return st;
}

// Square collocation: weights reproduce the derivatives of every basis function exactly.
NodeStencil collocation_stencil(const MappedGrid& g, int centre, const std::vector<LocalNode>& local, double scale,
                                bool one_sided) {
    const int m = static_cast<int>(local.size());
    Eigen::MatrixXd v(m, m);
    const Vec2& xc = g.node(centre);
    for (int r = 0; r < m; ++r) {
        const Vec2 x = (g.node(local[r].k) - xc) / scale;
        const double s = local[r].s;
        const double t = local[r].t;
        physical_quadratics(x, v, r);
        // Logical monomials whose value and first two derivatives vanish at the centre.
        v(r, 6) = s * s * t;
        v(r, 7) = s * t * t;
        v(r, 8) = s * s * t * t;
        if (one_sided) {
            v(r, 9) = s * s * s;
            v(r, 10) = s * s * s * t;
            v(r, 11) = s * s * s * t * t;
        }
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(v.transpose());
    if (!lu.isInvertible()) {
        std::ostringstream os;
        os << "stencil at node " << centre << " is singular";
        throw GeometryError(os.str());
    }
    const auto d = derivative_rows(m, scale);
    std::array<Eigen::VectorXd, 5> w;
    for (int q = 0; q < 5; ++q) w[q] = lu.solve(d[q]);
    std::vector<int> nodes(m);
    for (int r = 0; r < m; ++r) nodes[r] = local[r].k;
    return assemble(nodes, w);
}

// Least-squares cubic fit in physical coordinates.
NodeStencil least_squares_stencil(const MappedGrid& g, int centre, const std::vector<int>& nodes, double scale) {
    const int m = static_cast<int>(nodes.size());
    Eigen::MatrixXd v(m, 10);
    const Vec2& xc = g.node(centre);
    for (int r = 0; r < m; ++r) {
        const Vec2 x = (g.node(nodes[r]) - xc) / scale;
        physical_quadratics(x, v, r);
        v(r, 6) = x.x() * x.x() * x.x();
        v(r, 7) = x.x() * x.x() * x.y();
        v(r, 8) = x.x() * x.y() * x.y();
        v(r, 9) = x.y() * x.y() * x.y();
    }
    const Eigen::MatrixXd normal = v.transpose() * v;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success) throw GeometryError("least-squares stencil is singular");
    const auto d = derivative_rows(10, scale);
    std::array<Eigen::VectorXd, 5> w;
    for (int q = 0; q < 5; ++q) w[q] = v * ldlt.solve(d[q]);
    return assemble(nodes, w);
}

std::array<double, 4> lagrange4(double x, const std::array<double, 4>& xs) {
    std::array<double, 4> w{};
    for (int a = 0; a < 4; ++a) {
        double num = 1.0;
        double den = 1.0;
        for (int b = 0; b < 4; ++b) {
            if (b == a) continue;
            num *= x - xs[b];
            den *= xs[a] - xs[b];
        }
        w[a] = num / den;
    }
    return w;
}

// 1 near the pole, 0 from rho = 0.5 outward, C^2 in between.
double pole_blend(double rho) {
    constexpr double lo = 0.2;
    constexpr double hi = 0.5;
    if (rho <= lo) return 1.0;
    if (rho >= hi) return 0.0;
    const double x = (hi - rho) / (hi - lo);
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
}

// alpha a + (1 - alpha) b; every node of b must appear in a.
NodeStencil blend(const NodeStencil& a, const NodeStencil& b, double alpha) {
    NodeStencil out = a;
    const auto scale = [alpha](std::vector<double>& v) {
        for (double& x : v) x *= alpha;
    };
    scale(out.gx);
    scale(out.gy);
    scale(out.hxx);
    scale(out.hxy);
    scale(out.hyy);
    for (std::size_t r = 0; r < b.nodes.size(); ++r) {
        const auto it = std::find(out.nodes.begin(), out.nodes.end(), b.nodes[r]);
        const std::size_t pos = static_cast<std::size_t>(it - out.nodes.begin());
        const double w = 1.0 - alpha;
        out.gx[pos] += w * b.gx[r];
        out.gy[pos] += w * b.gy[r];
        out.hxx[pos] += w * b.hxx[r];
        out.hxy[pos] += w * b.hxy[r];
        out.hyy[pos] += w * b.hyy[r];
    }
    return out;
}

}  // namespace

std::shared_ptr<const MappedGrid> MappedGrid::build(const ConvexDomain& domain, int n_rho, int n_theta) {
    if (n_rho < 8) throw GeometryError("build_grid: n_rho must be >= 8");
    if (n_theta < 16 || n_theta % 2 != 0) throw GeometryError("build_grid: n_theta must be even and >= 16");
    auto g = std::shared_ptr<MappedGrid>(new MappedGrid(domain, n_rho, n_theta));
    const int total = (n_rho - 1) * n_theta + 1;
    g->nodes_.resize(total);
    g->x_rho_.resize(total);
    g->x_theta_.resize(total);
    g->jacobian_.resize(total);
    g->weights_ = Eigen::VectorXd::Zero(total);

    const Vec2& o = domain.origin();
    g->nodes_[0] = o;
    g->x_rho_[0] = Vec2::Zero();
    g->x_theta_[0] = Vec2::Zero();
    g->jacobian_[0] = 0.0;
    g->interior_.push_back(0);
    const double drho = 1.0 / (n_rho - 1);
    const double dtheta = kTwoPi / n_theta;
    double rmax = 0.0;
    for (int j = 0; j < n_theta; ++j) {
        const double th = g->theta(j);
        const double r = domain.radius(th);
        if (!(r > 0.0)) throw GeometryError("build_grid: domain is not star-shaped about its origin");
        rmax = std::max(rmax, r);
        const double r1 = domain.radius_d1(th);
        const Vec2 e(std::cos(th), std::sin(th));
        const Vec2 ep(-std::sin(th), std::cos(th));
        for (int i = 1; i < n_rho; ++i) {
            const int k = g->index(i, j);
            const double rho = g->rho(i);
            g->nodes_[k] = i == n_rho - 1 ? domain.point(th) : Vec2(o + rho * r * e);
            g->x_rho_[k] = r * e;
            g->x_theta_[k] = rho * (r1 * e + r * ep);
            g->jacobian_[k] = rho * r * r;
            const double trap = i == n_rho - 1 ? 0.5 : 1.0;
            g->weights_[k] = trap * drho * dtheta * g->jacobian_[k];
            if (i == n_rho - 1) {
                g->boundary_.push_back(k);
            } else {
                g->interior_.push_back(k);
            }
        }
    }
    std::sort(g->interior_.begin(), g->interior_.end());
    g->spacing_ = rmax * drho;
    g->build_stencils();
    return g;
}

double MappedGrid::theta(int j) const noexcept { return kTwoPi * j / n_theta_; }

int MappedGrid::index(int i, int j) const noexcept {
    if (i == 0) return 0;
    const int jj = ((j % n_theta_) + n_theta_) % n_theta_;
    return 1 + (i - 1) * n_theta_ + jj;
}

int MappedGrid::ring_of(int k) const noexcept { return k == 0 ? 0 : 1 + (k - 1) / n_theta_; }

int MappedGrid::column_of(int k) const noexcept { return k == 0 ? 0 : (k - 1) % n_theta_; }

void MappedGrid::build_stencils() {
    stencils_.resize(nodes_.size());
    const double drho = 1.0 / (n_rho_ - 1);
    {
        std::vector<int> nodes{0};
        for (int i = 1; i <= 2; ++i)
            for (int j = 0; j < n_theta_; ++j) nodes.push_back(index(i, j));
        stencils_[0] = least_squares_stencil(*this, 0, nodes, domain_.max_radius() * drho);
    }
    const int half = n_theta_ / 2;
    for (int j = 0; j < n_theta_; ++j) {
        const double scale = domain_.radius(theta(j)) * drho;
        {
            std::vector<int> nodes{0};
            for (int dj = -2; dj <= 2; ++dj) nodes.push_back(index(1, j + dj));
            for (int dj = -2; dj <= 2; ++dj) nodes.push_back(index(2, j + dj));
            for (int dj = -2; dj <= 2; ++dj) nodes.push_back(index(1, j + half + dj));
            stencils_[index(1, j)] = least_squares_stencil(*this, index(1, j), nodes, scale);
        }
        // Near the pole the compact stencil is lopsided (inner arcs shorter than outer ones)
        // and only first order. A cubic fit over a 5x5 patch takes over there, blended in
        // smoothly in rho so the Hessian error has no seam.
        for (int i = 2; i < n_rho_ - 1; ++i) {
            const double alpha = pole_blend(rho(i));
            NodeStencil compact;
            if (alpha < 1.0) {
                std::vector<LocalNode> local;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) local.push_back({index(i + di, j + dj), double(di), double(dj)});
                compact = collocation_stencil(*this, index(i, j), local, scale, false);
                if (alpha == 0.0) {
                    stencils_[index(i, j)] = std::move(compact);
                    continue;
                }
            }
            std::vector<int> nodes;
            if (i == 2) nodes.push_back(0);
            for (int di = -2; di <= 2; ++di) {
                if (i + di < 1 || i + di > n_rho_ - 1) continue;
                for (int dj = -2; dj <= 2; ++dj) nodes.push_back(index(i + di, j + dj));
            }
            NodeStencil fitted = least_squares_stencil(*this, index(i, j), nodes, scale);
            stencils_[index(i, j)] = alpha == 1.0 ? std::move(fitted) : blend(fitted, compact, alpha);
        }
        {
            const int i = n_rho_ - 1;
            std::vector<LocalNode> local;
            for (int di = 0; di >= -3; --di)
                for (int dj = -1; dj <= 1; ++dj) local.push_back({index(i + di, j + dj), double(di), double(dj)});
            stencils_[index(i, j)] = collocation_stencil(*this, index(i, j), local, scale, true);
        }
    }
}

ScalarField::ScalarField(std::shared_ptr<const MappedGrid> grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw std::invalid_argument("ScalarField: null grid");
    if (values_.size() != grid_->size()) {
        std::ostringstream os;
        os << "ScalarField: " << values_.size() << " values for a grid of " << grid_->size() << " nodes";
        throw std::invalid_argument(os.str());
    }
    if (!values_.allFinite()) throw std::invalid_argument("ScalarField: non-finite value");
}

ScalarField ScalarField::from_function(std::shared_ptr<const MappedGrid> grid,
                                       const std::function<double(const Vec2&)>& f) {
    Eigen::VectorXd v(grid->size());
    for (int k = 0; k < grid->size(); ++k) v[k] = f(grid->node(k));
    return ScalarField(std::move(grid), std::move(v));
}

std::vector<Vec2> gradient(const MappedGrid& grid, const Eigen::VectorXd& u) {
    std::vector<Vec2> out(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const NodeStencil& st = grid.stencil(k);
        double gx = 0.0, gy = 0.0;
        for (std::size_t r = 0; r < st.nodes.size(); ++r) {
            const double v = u[st.nodes[r]];
            gx += st.gx[r] * v;
            gy += st.gy[r] * v;
        }
        out[k] = Vec2(gx, gy);
    }
    return out;
}

std::vector<Mat2> hessian(const MappedGrid& grid, const Eigen::VectorXd& u) {
    std::vector<Mat2> out(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const NodeStencil& st = grid.stencil(k);
        double xx = 0.0, xy = 0.0, yy = 0.0;
        for (std::size_t r = 0; r < st.nodes.size(); ++r) {
            const double v = u[st.nodes[r]];
            xx += st.hxx[r] * v;
            xy += st.hxy[r] * v;
            yy += st.hyy[r] * v;
        }
        out[k] << xx, xy, xy, yy;
    }
    return out;
}

std::vector<Mat2> third_derivatives(const MappedGrid& grid, const Eigen::VectorXd& u, int k) {
    if (k != 0 && k != 1) throw std::invalid_argument("third_derivatives: direction must be 0 or 1");
    const std::vector<Mat2> h = hessian(grid, u);
    std::vector<Mat2> out(grid.size());
    for (int n = 0; n < grid.size(); ++n) {
        const NodeStencil& st = grid.stencil(n);
        const std::vector<double>& w = k == 0 ? st.gx : st.gy;
        Mat2 acc = Mat2::Zero();
        for (std::size_t r = 0; r < st.nodes.size(); ++r) acc += w[r] * h[st.nodes[r]];
        out[n] = acc;
    }
    return out;
}

double integrate(const MappedGrid& grid, const Eigen::VectorXd& v) { return grid.quadrature_weights().dot(v); }

double integrate_det_hessian(const MappedGrid& grid, const Eigen::VectorXd& u) {
    const std::vector<Mat2> h = hessian(grid, u);
    Eigen::VectorXd det(grid.size());
    for (int k = 0; k < grid.size(); ++k) det[k] = h[k].determinant();
    return integrate(grid, det);
}

InterpolationWeights FieldInterpolator::weights(const Vec2& p) const {
    const MappedGrid& g = *grid_;
    const ConvexDomain& dom = g.domain();
    const int nt = g.n_theta();
    const int nr = g.n_rho();
    const double dtheta = kTwoPi / nt;
    const Vec2 rel = p - dom.origin();
    const double r = rel.norm();
    double th = std::atan2(rel.y(), rel.x());
    if (th < 0.0) th += kTwoPi;

    // Angular stencil on each ring, on this side (th) and on the opposite side (th + pi).
    struct Angular {
        std::array<int, 4> cols;
        std::array<double, 4> w;
    };
    const auto angular = [&](double angle) {
        angle = std::fmod(angle, kTwoPi);
        if (angle < 0.0) angle += kTwoPi;
        const double x = angle / dtheta;
        const int j0 = static_cast<int>(std::floor(x));
        Angular a{};
        for (int q = 0; q < 4; ++q) a.cols[q] = j0 - 1 + q;
        a.w = lagrange4(x - j0, {-1.0, 0.0, 1.0, 2.0});
        return a;
    };
    const Angular here = angular(th);
    const Angular there = angular(th + std::numbers::pi);
    const double r_here = dom.radius(th);
    const double r_there = dom.radius(th + std::numbers::pi);

    // Signed positions along the line through the pole, ascending.
    // Entry m < nr - 1 is ring (nr - 1 - m) on the far side, m = nr - 1 is the pole.
    const int line_size = 2 * nr - 1;
    const auto position = [&](int m) {
        const int i = m - (nr - 1);
        return i < 0 ? -g.rho(-i) * r_there : g.rho(i) * r_here;
    };
    int m0 = nr - 1;
    while (m0 + 1 < line_size - 1 && position(m0 + 1) <= r) ++m0;
    int first = std::clamp(m0 - 1, 0, line_size - 4);
    std::array<double, 4> xs{};
    for (int q = 0; q < 4; ++q) xs[q] = position(first + q);
    const std::array<double, 4> lw = lagrange4(r, xs);

    InterpolationWeights out;
    for (int q = 0; q < 4; ++q) {
        const int i = first + q - (nr - 1);
        if (i == 0) {
            out.terms.emplace_back(0, lw[q]);
            continue;
        }
        const Angular& a = i > 0 ? here : there;
        const int ring = std::abs(i);
        for (int c = 0; c < 4; ++c) out.terms.emplace_back(g.index(ring, a.cols[c]), lw[q] * a.w[c]);
    }
    out.outside = std::max(0.0, r - r_here);
    return out;
}

}  // namespace lagmc
