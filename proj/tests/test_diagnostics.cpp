#include "doctest.h"

#include "lagmc/diagnostics.hpp"
#include "lagmc/eig.hpp"
#include "lagmc/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace lagmc;

namespace {

constexpr double kPi = std::numbers::pi;

ProblemSpec ball_spec(double tau, int n_rho = 16) {
    ProblemSpec s;
    s.op = OperatorParams::from_tau(tau);
    s.n_rho = n_rho;
    s.n_theta = 2 * n_rho;
    return s;
}

SolveState state_of(const Problem& p, const std::function<double(const Vec2&)>& fn, double c = 0.0) {
    SolveState s;
    s.grid = p.grid;
    s.u.resize(p.grid->size());
    for (int k = 0; k < p.grid->size(); ++k) s.u[k] = fn(p.grid->node(k));
    s.c = c;
    s.t = 1.0;
    return s;
}

bool all_finite(const nlohmann::json& j) {
    if (j.is_number_float()) return std::isfinite(j.get<double>());
    if (j.is_structured()) {
        for (const auto& v : j) {
            if (!all_finite(v)) return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("ball to ball certificates") {
    const ProblemSpec spec = ball_spec(kPi / 2);
    const Problem p = Problem::primal(spec);
    const SolveState s = continuity_solve(p);
    REQUIRE(s.converged);

    const ObliquenessResult ob = check_obliqueness(s, p);
    CHECK(ob.values.size() == p.grid->boundary_nodes().size());
    for (double v : ob.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ob.identity_err <= 1e-8);

    const PinchingResult pin = check_pinching(s, p);
    CHECK(pin.mu_hat == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(pin.omega_hat == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(pin.det_min == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(pin.det_max == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(pin.bracketed);
    CHECK(pin.mass_err <= 1e-12);

    const MeanCurvatureResult mc = check_mean_curvature(s, p);
    CHECK(mc.nodes_used > 0);
    CHECK(mc.err <= 1e-8);
    CHECK(boundary_image_err(s, p) <= 1e-12);

    const Problem dp = Problem::dual(spec);
    const SolveState d = solve_dual(spec, s);
    const DualityResult du = check_duality(s, d, p, dp);
    CHECK(du.roundtrip_err <= 1e-9);
    CHECK(du.c_dual_err <= 1e-10);
    CHECK(du.reciprocity_err <= 1e-9);
    CHECK(du.reciprocity_samples == 100);
    CHECK(du.outside_flagged == 0);
    CHECK(du.obliqueness_symmetry_err <= 1e-9);

    const UniquenessResult un = check_uniqueness(p);
    CHECK(un.conclusive);
    CHECK(un.range <= 1e-9);
    CHECK(un.c_diff <= 1e-10);
    CHECK(un.boundary_image_err_b <= 1e-6);
}

TEST_CASE("obliqueness for a disk mapped onto an ellipse") {
    ProblemSpec spec = ball_spec(kPi / 3);
    spec.target = ConvexDomain::ellipse({0, 0}, {2.0, 1.0}, 0.0);
    const Problem p = Problem::primal(spec);
    const SolveState s = state_of(p, [](const Vec2& x) { return x.x() * x.x() + 0.5 * x.y() * x.y(); });
    const ObliquenessResult ob = check_obliqueness(s, p);
    const auto& bn = p.grid->boundary_nodes();
    for (std::size_t b = 0; b < bn.size(); ++b) {
        const Vec2& x = p.grid->node(bn[b]);
        // beta is the ellipse's inward normal at (2 x1, x2), nu = -x.
        const double expect = (0.5 * x.x() * x.x() + x.y() * x.y()) / std::hypot(0.5 * x.x(), x.y());
        CHECK(ob.values[b] == doctest::Approx(expect).epsilon(1e-8));
    }
    CHECK(ob.min > 0.0);
    CHECK(ob.identity_err <= 1e-8);
    CHECK(boundary_image_err(s, p) <= 1e-9);
}

TEST_CASE("boundary image error of a scaled potential") {
    const Problem p = Problem::primal(ball_spec(kPi / 2));
    const SolveState s = state_of(p, [](const Vec2& x) { return 1.1 * x.squaredNorm(); });
    CHECK(boundary_image_err(s, p) == doctest::Approx(0.2).epsilon(1e-10));
}

TEST_CASE("induced metric inverts to the operator derivative") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u01(0.05, 5.0);
    for (double tau : {kPi / 8, kPi / 4, 0.35 * kPi, kPi / 2}) {
        const OperatorParams op = OperatorParams::from_tau(tau);
        for (int trial = 0; trial < 50; ++trial) {
            const double a = u01(rng);
            const double b = u01(rng);
            const double th = u01(rng);
            Mat2 q;
            q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
            const Mat2 h = q * Vec2(a, b).asDiagonal() * q.transpose();
            const Mat2 gi = induced_metric(op, h).inverse();
            const Mat2 fij = SpectralOperator(op, Side::Primal).evaluate(h).derivative;
            CHECK((gi - fij).norm() <= 1e-12 * fij.norm());
        }
    }
}

TEST_CASE("quadratic potentials have zero mean-curvature error") {
    ProblemSpec spec = ball_spec(kPi / 4, 20);
    spec.target = ConvexDomain::ellipse({0.2, 0.1}, {2.0, 1.2}, 0.4);
    const Problem p = Problem::primal(spec);
    const SolveState s = state_of(p, [](const Vec2& x) { return 0.9 * x.x() * x.x() + 0.2 * x.x() * x.y() + 0.6 * x.y() * x.y(); });
    const MeanCurvatureResult mc = check_mean_curvature(s, p);
    CHECK(mc.err <= 1e-8);
    CHECK(mc.metric_gap <= 1e-10);
}

TEST_CASE("affine right-hand side certificates") {
    ProblemSpec spec = ball_spec(kPi / 2, 24);
    spec.f = RightHandSide::affine({0.05, 0.0});
    const Problem p = Problem::primal(spec);
    const SolveState s = continuity_solve(p);
    REQUIRE(s.converged);
    DiagnosticsReport r = diagnose(s, p);
    CHECK(r.hard_pass());
    CHECK(r.obliqueness.min > 0.9);
    CHECK(r.obliqueness.identity_err <= 1e-6);
    CHECK(r.pinching.mu_hat <= r.pinching.omega_hat + 1.0);
    CHECK(r.pinching.bracketed);
    CHECK(r.pinching.mass_err <= 1e-4);
    CHECK(r.boundary_image_err <= 1e-6);
    CHECK(r.mean_curvature.err <= 1e-4);
    CHECK(r.mean_curvature.oracle_gap <= 1e-4);
    CHECK(r.mean_curvature.metric_gap <= 1e-10);

    const Problem dp = Problem::dual(spec);
    const SolveState d = solve_dual(spec, s);
    r.duality = check_duality(s, d, p, dp);
    CHECK(r.duality->c_dual_err <= 1e-5);
    CHECK(r.duality->roundtrip_err <= 5 * p.grid->spacing() * p.grid->spacing());
    CHECK(r.duality->reciprocity_err <= 1e-3);
    CHECK(r.duality->obliqueness_symmetry_err <= 1e-4);

    r.uniqueness = check_uniqueness(p, s);
    CHECK(r.uniqueness->conclusive);
    CHECK(r.uniqueness->max_diff <= 1e-6);
    CHECK(r.uniqueness->c_diff <= 1e-8);

    // Reports are pure functions of the state and serialize losslessly.
    const nlohmann::json j = to_json(r);
    CHECK(all_finite(j));
    CHECK(nlohmann::json::parse(j.dump()) == j);
    DiagnosticsReport again = diagnose(s, p);
    again.duality = check_duality(s, d, p, dp);
    again.uniqueness = r.uniqueness;
    CHECK(to_json(again).dump() == j.dump());
    for (const char* key : {"obliqueness_min", "obliqueness_identity_err", "pinching", "mass_err",
                            "boundary_image_err", "mean_curvature_err", "duality_roundtrip_err", "c_dual_err",
                            "uniqueness_err"}) {
        CHECK(j.contains(key));
    }
}

TEST_CASE("refinement delta and hard certificates") {
    DiagnosticsReport fine;
    fine.converged = true;
    fine.min_hessian_eig = 1.0;
    fine.eps_pos = 1e-6;
    fine.obliqueness.min = 0.5;
    fine.pinching.mass_err = 1e-4;
    DiagnosticsReport coarse = fine;
    coarse.pinching.mass_err = 4e-4;
    const nlohmann::json d = refinement_delta(fine, coarse);
    CHECK(d["mass_err"]["delta"].get<double>() == doctest::Approx(-3e-4));
    CHECK(d.contains("mean_curvature_err"));
    CHECK(fine.hard_pass());
    fine.obliqueness.min = -0.1;
    CHECK_FALSE(fine.hard_pass());
    coarse.min_hessian_eig = 1e-7;
    CHECK_FALSE(coarse.hard_pass());
}

TEST_CASE("halton") {
    CHECK(halton(1, 2) == 0.5);
    CHECK(halton(2, 2) == 0.25);
    CHECK(halton(3, 2) == 0.75);
    CHECK(halton(1, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(halton(4, 3) == doctest::Approx(4.0 / 9.0));
}

TEST_CASE("verify_structure_conditions") {
    const StructureMargins right = verify_structure_conditions(OperatorParams::from_tau(kPi / 2), 1.0, 1.0, 10000);
    CHECK(right.ok);
    CHECK(right.bounds.grad_sum.lo == doctest::Approx(0.5));
    CHECK(right.bounds.grad_sum.hi == doctest::Approx(2.0));
    CHECK(right.bounds.weighted_sum.lo == doctest::Approx(0.5));
    CHECK(right.bounds.weighted_sum.hi == doctest::Approx(2.0));

    for (double tau : {kPi / 8, kPi / 4, 3 * kPi / 8, kPi / 2}) {
        for (auto [s1, s2] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}}) {
            const StructureMargins m = verify_structure_conditions(OperatorParams::from_tau(tau), s1, s2, 10000);
            CHECK(m.ok);
            CHECK(m.failing_sample.empty());
            CHECK(m.grad_sum_slack >= 0.0);
            CHECK(m.weighted_sum_slack >= 0.0);
            CHECK(m.monotonicity_min > 0.0);
            CHECK(m.concavity_max <= 0.0);
            CHECK(m.dual_concavity_max <= 0.0);
        }
        CHECK(verify_structure_conditions(OperatorParams::from_tau(tau), 0.5, 2.0, 2000, 3).ok);
    }
    CHECK_THROWS_AS((void)verify_structure_conditions(OperatorParams::from_tau(1.0), 0.0, 1.0, 10), DomainError);
}
