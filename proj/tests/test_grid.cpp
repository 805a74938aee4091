#include "doctest.h"

#include "lagmc/errors.hpp"
#include "lagmc/grid.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lagmc;

namespace {

constexpr double kPi = std::numbers::pi;

ConvexDomain fourier_shape() { return ConvexDomain::smooth_convex({0.1, 0.0}, 1.0, {0.05, 0.02}, {0.0, 0.03}); }

double smooth(const Vec2& p) { return std::sin(p.x() + 0.5 * p.y()) + std::exp(0.3 * p.y()); }
Vec2 smooth_grad(const Vec2& p) {
    const double a = p.x() + 0.5 * p.y();
    return {std::cos(a), 0.5 * std::cos(a) + 0.3 * std::exp(0.3 * p.y())};
}
Mat2 smooth_hess(const Vec2& p) {
    const double s = std::sin(p.x() + 0.5 * p.y());
    Mat2 h;
    h << -s, -0.5 * s, -0.5 * s, -0.25 * s + 0.09 * std::exp(0.3 * p.y());
    return h;
}

Eigen::VectorXd sample(const MappedGrid& g, double (*f)(const Vec2&)) {
    Eigen::VectorXd v(g.size());
    for (int k = 0; k < g.size(); ++k) v[k] = f(g.node(k));
    return v;
}

// Gauss-Legendre nodes on [0, 1] by Newton on P_n.
std::vector<std::pair<double, double>> gauss_legendre(int n) {
    std::vector<std::pair<double, double>> out;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(kPi * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        out.emplace_back(0.5 * (x + 1), 1.0 / ((1 - x * x) * dp * dp));
    }
    return out;
}

}  // namespace

TEST_CASE("grid layout") {
    const auto g = MappedGrid::build(ConvexDomain::disk({0, 0}, 1.0), 8, 16);
    CHECK(g->size() == 7 * 16 + 1);
    CHECK(g->boundary_nodes().size() == 16);
    CHECK(g->interior_nodes().size() + g->boundary_nodes().size() == static_cast<std::size_t>(g->size()));
    for (int i = 1; i < 8; ++i)
        for (int j = 0; j < 16; ++j) CHECK(g->node(g->index(i, j)).norm() == doctest::Approx(g->rho(i)));
    CHECK(g->index(3, -1) == g->index(3, 15));
    CHECK(g->ring_of(g->index(5, 7)) == 5);
    CHECK(g->column_of(g->index(5, 7)) == 7);
    CHECK_THROWS_AS((void)MappedGrid::build(ConvexDomain::disk({0, 0}, 1.0), 7, 16), GeometryError);
    CHECK_THROWS_AS((void)MappedGrid::build(ConvexDomain::disk({0, 0}, 1.0), 8, 17), GeometryError);

    const ConvexDomain f = fourier_shape();
    const auto gf = MappedGrid::build(f, 12, 32);
    for (int k : gf->boundary_nodes()) CHECK((gf->node(k) - f.project(gf->node(k)).point).norm() <= 1e-10);
}

TEST_CASE("metric terms match differences of the map") {
    const ConvexDomain f = fourier_shape();
    const auto g = MappedGrid::build(f, 16, 32);
    const double eps = 1e-6;
    for (int i = 1; i < 15; ++i) {
        for (int j = 0; j < 32; ++j) {
            const int k = g->index(i, j);
            const auto map = [&](double rho, double th) { return Vec2(f.origin() + rho * f.radius(th) * Vec2(std::cos(th), std::sin(th))); };
            const Vec2 xr = (map(g->rho(i) + eps, g->theta(j)) - map(g->rho(i) - eps, g->theta(j))) / (2 * eps);
            const Vec2 xt = (map(g->rho(i), g->theta(j) + eps) - map(g->rho(i), g->theta(j) - eps)) / (2 * eps);
            CHECK((xr - g->x_rho(k)).norm() <= 1e-8);
            CHECK((xt - g->x_theta(k)).norm() <= 1e-8);
            Mat2 jac;
            jac << g->x_rho(k), g->x_theta(k);
            CHECK(jac.determinant() == doctest::Approx(g->jacobian(k)).epsilon(1e-12));
        }
    }
}

TEST_CASE("exactness on affine and quadratic fields") {
    for (const ConvexDomain& d : {ConvexDomain::disk({0, 0}, 1.0), ConvexDomain::ellipse({0.2, -0.1}, {2, 1}, 0.4),
                                  fourier_shape()}) {
        for (auto [nr, nt] : {std::pair{8, 16}, std::pair{24, 48}}) {
            const auto g = MappedGrid::build(d, nr, nt);
            const Eigen::VectorXd lin = sample(*g, [](const Vec2& p) { return p.x(); });
            const Eigen::VectorXd aff = sample(*g, [](const Vec2& p) { return 0.4 - 2 * p.x() + 3 * p.y(); });
            const Eigen::VectorXd quad = sample(*g, [](const Vec2& p) { return p.squaredNorm(); });
            const auto gl = gradient(*g, lin);
            const auto ha = hessian(*g, aff);
            const auto gq = gradient(*g, quad);
            const auto hq = hessian(*g, quad);
            for (int k = 0; k < g->size(); ++k) {
                CHECK((gl[k] - Vec2(1, 0)).norm() <= 1e-10);
                CHECK(ha[k].norm() <= 1e-9);
                CHECK((gq[k] - 2 * g->node(k)).norm() <= 1e-9);
                CHECK((hq[k] - 2 * Mat2::Identity()).norm() <= 1e-9);
            }
        }
    }
}

TEST_CASE("second-order convergence under doubling") {
    for (const ConvexDomain& d : {ConvexDomain::disk({0, 0}, 1.0), fourier_shape()}) {
        double prev_g = 0, prev_h = 0, prev_x4 = 0;
        for (int lev = 0; lev < 3; ++lev) {
            const auto g = MappedGrid::build(d, 16 << lev, 32 << lev);
            const Eigen::VectorXd u = sample(*g, smooth);
            const Eigen::VectorXd x4 = sample(*g, [](const Vec2& p) { return std::pow(p.x(), 4); });
            const auto gu = gradient(*g, u);
            const auto hu = hessian(*g, u);
            const auto h4 = hessian(*g, x4);
            double eg = 0, eh = 0, e4 = 0;
            for (int k = 0; k < g->size(); ++k) {
                const Vec2& p = g->node(k);
                eg = std::max(eg, (gu[k] - smooth_grad(p)).norm());
                eh = std::max(eh, (hu[k] - smooth_hess(p)).norm());
                Mat2 exact = Mat2::Zero();
                exact(0, 0) = 12 * p.x() * p.x();
                e4 = std::max(e4, (h4[k] - exact).norm());
            }
            if (lev > 0) {
                const double og = std::log2(prev_g / eg), oh = std::log2(prev_h / eh), o4 = std::log2(prev_x4 / e4);
                CHECK(og >= 1.8);
                CHECK(og <= 2.3);
                CHECK(oh >= 1.8);
                CHECK(oh <= 2.3);
                CHECK(o4 >= 1.9);
            }
            prev_g = eg;
            prev_h = eh;
            prev_x4 = e4;
        }
    }
}

TEST_CASE("third derivatives") {
    const ConvexDomain d = ConvexDomain::disk({0, 0}, 1.0);
    const auto g = MappedGrid::build(d, 16, 32);
    const Eigen::VectorXd quad = sample(*g, [](const Vec2& p) { return p.squaredNorm() + 0.7 * p.x() * p.y(); });
    for (int k = 0; k < 2; ++k)
        for (const Mat2& t : third_derivatives(*g, quad, k)) CHECK(t.norm() <= 1e-8);

    double prev_cube = 0, prev_sym = 0;
    for (int lev = 0; lev < 3; ++lev) {
        const auto gg = MappedGrid::build(d, 16 << lev, 32 << lev);
        const Eigen::VectorXd cube = sample(*gg, [](const Vec2& p) { return p.x() * p.x() * p.x(); });
        const Eigen::VectorXd u = sample(*gg, smooth);
        const auto t0 = third_derivatives(*gg, cube, 0);
        const auto s0 = third_derivatives(*gg, u, 0);
        const auto s1 = third_derivatives(*gg, u, 1);
        double ec = 0, es = 0;
        for (int k : gg->interior_nodes()) {
            if (gg->ring_of(k) >= gg->n_rho() - 2) continue;
            ec = std::max(ec, std::abs(t0[k](0, 0) - 6.0));
            // u_{112} two ways, u_{122} two ways
            es = std::max(es, std::abs(s0[k](0, 1) - s1[k](0, 0)));
            es = std::max(es, std::abs(s0[k](1, 1) - s1[k](0, 1)));
        }
        if (lev > 0) {
            CHECK(std::log2(prev_cube / ec) >= 1.8);
            CHECK(std::log2(prev_sym / es) >= 1.8);
        }
        prev_cube = ec;
        prev_sym = es;
    }
}

TEST_CASE("quadrature") {
    const ConvexDomain disk = ConvexDomain::disk({0, 0}, 1.0);
    const auto g = MappedGrid::build(disk, 32, 64);
    CHECK(integrate(*g, Eigen::VectorXd::Ones(g->size())) == doctest::Approx(kPi).epsilon(1e-6));
    const Eigen::VectorXd r2 = sample(*g, [](const Vec2& p) { return p.squaredNorm(); });
    CHECK(integrate_det_hessian(*g, r2) == doctest::Approx(4 * kPi).epsilon(1e-4));

    // u = |x|^4: det D^2u = u'' u'/r, integrated radially with Gauss-Legendre.
    double oracle = 0.0;
    for (auto [r, w] : gauss_legendre(20)) oracle += w * 2 * kPi * r * (12 * r * r) * (4 * r * r);
    CHECK(oracle == doctest::Approx(16 * kPi).epsilon(1e-13));
    const auto gf = MappedGrid::build(disk, 64, 128);
    const Eigen::VectorXd r4 = sample(*gf, [](const Vec2& p) { return p.squaredNorm() * p.squaredNorm(); });
    CHECK(integrate_det_hessian(*gf, r4) == doctest::Approx(oracle).epsilon(2e-3));

    // Order on a smooth integrand over the Fourier shape, against a fine-grid reference.
    const ConvexDomain f = fourier_shape();
    const auto ref_grid = MappedGrid::build(f, 257, 512);
    const double ref = integrate(*ref_grid, sample(*ref_grid, smooth));
    double prev = 0;
    for (int lev = 0; lev < 3; ++lev) {
        const auto gl = MappedGrid::build(f, 1 + (8 << lev), 16 << lev);
        const double e = std::abs(integrate(*gl, sample(*gl, smooth)) - ref);
        if (lev > 0) CHECK(std::log2(prev / e) >= 2.0 - 0.05);
        prev = e;
    }
}

TEST_CASE("interpolation") {
    const ConvexDomain f = fourier_shape();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    std::vector<Vec2> pts;
    while (pts.size() < 300) {
        const Vec2 p(u(rng), u(rng));
        if (f.contains(p)) pts.push_back(p);
    }
    double prev = 0;
    for (int lev = 0; lev < 3; ++lev) {
        const auto g = MappedGrid::build(f, 16 << lev, 32 << lev);
        const FieldInterpolator interp(g);
        const Eigen::VectorXd v = sample(*g, smooth);
        double e = 0;
        for (const Vec2& p : pts) {
            const InterpolationWeights w = interp.weights(p);
            CHECK(w.outside == 0.0);
            e = std::max(e, std::abs(w.apply(v) - smooth(p)));
        }
        if (lev > 0) CHECK(std::log2(prev / e) >= 3.0);
        prev = e;
        // Exact reproduction at nodes.
        for (int k = 0; k < g->size(); k += 7) CHECK(interp(v, g->node(k)) == doctest::Approx(v[k]).epsilon(1e-11));
    }
}

TEST_CASE("scalar field validation") {
    const auto g = MappedGrid::build(ConvexDomain::disk({0, 0}, 1.0), 8, 16);
    CHECK_THROWS_AS(ScalarField(g, Eigen::VectorXd::Zero(3)), std::invalid_argument);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(g->size());
    bad[4] = std::nan("");
    CHECK_THROWS_AS(ScalarField(g, bad), std::invalid_argument);
    const ScalarField s = ScalarField::from_function(g, [](const Vec2& p) { return p.x(); });
    CHECK(s[g->index(7, 0)] == doctest::Approx(1.0));
}
