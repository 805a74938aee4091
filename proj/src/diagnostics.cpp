#include "lagmc/diagnostics.hpp"

#include "lagmc/eig.hpp"
#include "lagmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace lagmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const ConvexDomain& side_source(const Problem& p) { return p.side == Side::Primal ? p.spec.source : p.spec.target; }

// Periodic cubic Lagrange interpolation of per-column boundary values at polar angle th.
double boundary_interp(const MappedGrid& g, const std::vector<double>& ring, double th) {
    const int n = g.n_theta();
    const double dth = 2.0 * std::numbers::pi / n;
    double s = std::fmod(th, 2.0 * std::numbers::pi);
    if (s < 0) s += 2.0 * std::numbers::pi;
    s /= dth;
    const int j0 = static_cast<int>(std::floor(s));
    const double r = s - j0;
    const double xs[4] = {-1.0, 0.0, 1.0, 2.0};
    double v = 0.0;
    for (int a = 0; a < 4; ++a) {
        double w = 1.0;
        for (int b = 0; b < 4; ++b) {
            if (b != a) w *= (r - xs[b]) / (xs[a] - xs[b]);
        }
        v += w * ring[((j0 - 1 + a) % n + n) % n];
    }
    return v;
}

// Components of a vector field as separate nodal vectors, for interpolation.
std::pair<Eigen::VectorXd, Eigen::VectorXd> split(const std::vector<Vec2>& v) {
    Eigen::VectorXd a(v.size()), b(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        a[k] = v[k].x();
        b[k] = v[k].y();
    }
    return {a, b};
}

}  // namespace

ObliquenessResult check_obliqueness(const SolveState& state, const Problem& problem) {
    const MappedGrid& g = *state.grid;
    const std::vector<Vec2> du = gradient(g, state.u);
    const std::vector<Mat2> hs = hessian(g, state.u);
    ObliquenessResult res;
    res.min = kInf;
    for (int k : g.boundary_nodes()) {
        const Vec2 beta = problem.image_h.eval(du[k]).gradient;
        const Vec2 nu = g.domain().inward_normal_at(g.node(k));
        const double direct = beta.dot(nu);
        const double under = beta.dot(hs[k] * beta) * nu.dot(hs[k].ldlt().solve(nu));
        const double ident = std::sqrt(std::max(0.0, under));
        res.values.push_back(direct);
        res.identity_err = std::max(res.identity_err, std::abs(direct - ident));
        if (direct < res.min) {
            res.min = direct;
            res.worst_node = k;
        }
    }
    return res;
}

PinchingResult check_pinching(const SolveState& state, const Problem& problem) {
    const MappedGrid& g = *state.grid;
    const std::vector<Mat2> hs = hessian(g, state.u);
    PinchingResult res;
    res.mu_hat = -kInf;
    res.omega_hat = kInf;
    res.det_min = kInf;
    res.det_max = -kInf;
    res.det_target = problem.theta0 * problem.theta0;
    res.nearest_gap = kInf;
    for (int k = 0; k < g.size(); ++k) {
        const Vec2 ev = eigenvalues2(hs[k]);
        res.mu_hat = std::max(res.mu_hat, ev(0));
        res.omega_hat = std::min(res.omega_hat, ev(1));
        const double det = hs[k].determinant();
        res.det_min = std::min(res.det_min, det);
        res.det_max = std::max(res.det_max, det);
        const double gap = std::abs(det - res.det_target);
        if (gap < res.nearest_gap) {
            res.nearest_gap = gap;
            res.nearest_node = k;
        }
    }
    const double tol = 1e-9 * res.det_target;
    res.bracketed = (res.det_min <= res.det_target + tol && res.det_max >= res.det_target - tol);
    const double area = problem.image.area();
    res.mass_err = std::abs(integrate_det_hessian(g, state.u) - area) / area;
    return res;
}

Mat2 induced_metric(const OperatorParams& op, const Mat2& h) {
    const double st = std::sin(op.tau());
    const double ct = std::cos(op.tau());
    return st * (Mat2::Identity() + h * h) + 2.0 * ct * h;
}

MeanCurvatureResult check_mean_curvature(const SolveState& state, const Problem& problem) {
    const MappedGrid& g = *state.grid;
    const std::vector<Mat2> hs = hessian(g, state.u);
    const std::vector<Vec2> du = gradient(g, state.u);
    const std::vector<Mat2> t0 = third_derivatives(g, state.u, 0);
    const std::vector<Mat2> t1 = third_derivatives(g, state.u, 1);

    Eigen::VectorXd fval(g.size());
    for (int k = 0; k < g.size(); ++k) fval[k] = problem.op.evaluate(hs[k]).value;
    const std::vector<Vec2> dF = gradient(g, fval);

    const double sigma = problem.side == Side::Primal ? 1.0 : -1.0;
    MeanCurvatureResult res;
    for (int k = 0; k < g.size(); ++k) {
        if (g.ring_of(k) > g.n_rho() - 3) continue;
        // Contraction weights: g^{-1} on the primal side, dFtilde/dA on the dual side.
        const Mat2 w = problem.side == Side::Primal ? Mat2(induced_metric(problem.op.params(), hs[k]).inverse())
                                                    : problem.op.evaluate(hs[k]).derivative;
        Vec2 target;
        if (problem.side == Side::Primal) {
            target = state.t * problem.spec.f.gradient(g.node(k));
        } else {
            target = sigma * state.t * (hs[k] * problem.spec.f.gradient(du[k]));
        }
        const Vec2 contraction(w.cwiseProduct(t0[k]).sum(), w.cwiseProduct(t1[k]).sum());
        if (problem.side == Side::Primal) {
            const Mat2 fij = problem.op.evaluate(hs[k]).derivative;
            const Vec2 alt(fij.cwiseProduct(t0[k]).sum(), fij.cwiseProduct(t1[k]).sum());
            res.metric_gap = std::max(res.metric_gap, (contraction - alt).lpNorm<Eigen::Infinity>());
        }
        const double err = (contraction - target).lpNorm<Eigen::Infinity>();
        if (err > res.err) {
            res.err = err;
            res.worst_node = k;
        }
        res.oracle_gap = std::max(res.oracle_gap, (contraction - dF[k]).lpNorm<Eigen::Infinity>());
        ++res.nodes_used;
    }
    return res;
}

DualityResult check_duality(const SolveState& primal, const SolveState& dual, const Problem& problem,
                            const Problem& dual_problem, std::uint64_t seed) {
    const MappedGrid& g = *primal.grid;
    const MappedGrid& dg = *dual.grid;
    const std::vector<Vec2> du = gradient(g, primal.u);
    const std::vector<Mat2> hu = hessian(g, primal.u);
    const std::vector<Vec2> dv = gradient(dg, dual.u);
    const std::vector<Mat2> hv = hessian(dg, dual.u);
    const auto [vx, vy] = split(dv);
    Eigen::VectorXd vxx(dg.size()), vxy(dg.size()), vyy(dg.size());
    for (int k = 0; k < dg.size(); ++k) {
        vxx[k] = hv[k](0, 0);
        vxy[k] = hv[k](0, 1);
        vyy[k] = hv[k](1, 1);
    }
    const FieldInterpolator interp(dual.grid);
    const double h2 = g.spacing() * g.spacing();

    DualityResult res;
    res.c_dual_err = std::abs(primal.c - dual.c);
    for (int k : g.interior_nodes()) {
        const InterpolationWeights w = interp.weights(du[k]);
        res.max_outside = std::max(res.max_outside, w.outside);
        if (w.outside > h2) ++res.outside_flagged;
        const Vec2 back(w.apply(vx), w.apply(vy));
        res.roundtrip_err = std::max(res.roundtrip_err, (back - g.node(k)).norm());
    }

    std::vector<int> pool = g.interior_nodes();
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    const int count = std::min<int>(100, static_cast<int>(pool.size()));
    for (int s = 0; s < count; ++s) {
        const int k = pool[s];
        const InterpolationWeights w = interp.weights(du[k]);
        Mat2 hd;
        hd << w.apply(vxx), w.apply(vxy), w.apply(vxy), w.apply(vyy);
        const Vec2 lu = eigenvalues2(hu[k]);
        const Vec2 lv = eigenvalues2(hd);
        res.reciprocity_err = std::max({res.reciprocity_err, std::abs(lu(0) * lv(1) - 1.0), std::abs(lu(1) * lv(0) - 1.0)});
    }
    res.reciprocity_samples = count;

    // <beta~, nu~> at dual boundary nodes against the primal value at the matched point Dv(y).
    const ObliquenessResult op = check_obliqueness(primal, problem);
    std::vector<double> ring(g.n_theta());
    for (std::size_t b = 0; b < g.boundary_nodes().size(); ++b) ring[g.column_of(g.boundary_nodes()[b])] = op.values[b];
    const Vec2& origin = g.domain().origin();
    for (int k : dg.boundary_nodes()) {
        const Vec2 beta = dual_problem.image_h.eval(dv[k]).gradient;
        const Vec2 nu = dg.domain().inward_normal_at(dg.node(k));
        const Vec2 x = dv[k] - origin;
        const double primal_value = boundary_interp(g, ring, std::atan2(x.y(), x.x()));
        res.obliqueness_symmetry_err = std::max(res.obliqueness_symmetry_err, std::abs(beta.dot(nu) - primal_value));
    }
    return res;
}

double boundary_image_err(const SolveState& state, const Problem& problem) {
    const MappedGrid& g = *state.grid;
    const std::vector<Vec2> du = gradient(g, state.u);
    double err = 0.0;
    for (int k : g.boundary_nodes()) err = std::max(err, problem.image.project(du[k]).distance);
    return err;
}

UniquenessResult check_uniqueness(const Problem& problem, const SolveState& reference) {
    UniquenessResult res;
    const Eigen::VectorXd seed = perturbed_seed(*problem.grid, side_source(problem), problem.image);
    // Newton straight at t = 1 keeps the perturbation alive; a continuation from t = 0
    // would first collapse it onto the exact t = 0 quadratic. Fall back to that if Newton fails.
    SolveState other;
    res.note = "two seeds converged (direct Newton at t = 1)";
    try {
        other = newton_solve(problem, seed_state(problem, seed, 1.0));
    } catch (const std::exception&) {
        try {
            other = continuity_solve(problem, seed);
            res.note = "two seeds converged (continuation)";
        } catch (const std::exception& e) {
            res.note = std::string("perturbed solve failed: ") + e.what();
            return res;
        }
    }
    const MappedGrid& g = *problem.grid;
    const Eigen::VectorXd& w = g.quadrature_weights();
    const double area = g.domain().area();
    Eigen::VectorXd a = reference.u;
    Eigen::VectorXd b = other.u;
    a.array() -= w.dot(a) / area;
    b.array() -= w.dot(b) / area;
    const Eigen::VectorXd d = a - b;
    res.range = d.maxCoeff() - d.minCoeff();
    res.max_diff = d.lpNorm<Eigen::Infinity>();
    res.c_diff = std::abs(reference.c - other.c);
    res.boundary_image_err_a = boundary_image_err(reference, problem);
    res.boundary_image_err_b = boundary_image_err(other, problem);
    res.conclusive = true;
    return res;
}

UniquenessResult check_uniqueness(const Problem& problem) {
    SolveState ref;
    try {
        ref = continuity_solve(problem);
    } catch (const std::exception& e) {
        UniquenessResult res;
        res.note = std::string("reference solve failed: ") + e.what();
        return res;
    }
    return check_uniqueness(problem, ref);
}

double halton(std::uint64_t index, unsigned base) {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

StructureMargins verify_structure_conditions(const OperatorParams& params, double s1, double s2, int samples, int n) {
    if (!(s1 > 0.0) || !(s2 > 0.0)) throw DomainError("verify_structure_conditions: s1 and s2 must be positive");
    if (n < 2 || n > 3) throw DomainError("verify_structure_conditions: n must be 2 or 3", n);
    StructureMargins m;
    m.s1 = s1;
    m.s2 = s2;
    m.samples = samples;
    m.bounds = range_bounds(params, n, s1, s2);
    m.grad_sum_slack = kInf;
    m.weighted_sum_slack = kInf;
    m.monotonicity_min = kInf;
    m.concavity_max = -kInf;
    m.dual_concavity_max = -kInf;
    m.ok = true;
    for (int i = 1; i <= samples; ++i) {
        const double lo = s1 * halton(i, 2);
        const double hi = s2 / halton(i, 3);
        std::vector<double> lam = {lo, hi};
        if (n == 3) lam.insert(lam.begin() + 1, lo + (hi - lo) * halton(i, 5));
        const std::vector<double> grad = grad_F(params, lam);
        const std::vector<double> hess = hess_F_diag(params, lam);
        std::vector<double> mu(lam.size());
        std::transform(lam.begin(), lam.end(), mu.begin(), [](double l) { return 1.0 / l; });
        const std::vector<double> dhess = dual_hess_diag(params, mu);
        double gs = 0.0;
        double ws = 0.0;
        for (std::size_t j = 0; j < lam.size(); ++j) {
            gs += grad[j];
            ws += grad[j] * lam[j] * lam[j];
        }
        const double gslack = std::min(gs - m.bounds.grad_sum.lo, m.bounds.grad_sum.hi - gs);
        const double wslack = std::min(ws - m.bounds.weighted_sum.lo, m.bounds.weighted_sum.hi - ws);
        const double mono = *std::min_element(grad.begin(), grad.end());
        const double conc = *std::max_element(hess.begin(), hess.end());
        const double dconc = *std::max_element(dhess.begin(), dhess.end());
        m.grad_sum_slack = std::min(m.grad_sum_slack, gslack);
        m.weighted_sum_slack = std::min(m.weighted_sum_slack, wslack);
        m.monotonicity_min = std::min(m.monotonicity_min, mono);
        m.concavity_max = std::max(m.concavity_max, conc);
        m.dual_concavity_max = std::max(m.dual_concavity_max, dconc);
        const bool good = gslack >= 0.0 && wslack >= 0.0 && mono > 0.0 && conc <= 0.0 && dconc <= 0.0;
        if (!good && m.ok) {
            m.ok = false;
            m.failing_sample = lam;
        }
    }
    return m;
}

bool DiagnosticsReport::hard_pass() const {
    return converged && obliqueness.min > 0.0 && min_hessian_eig > eps_pos;
}

DiagnosticsReport diagnose(const SolveState& state, const Problem& problem) {
    DiagnosticsReport r;
    r.obliqueness = check_obliqueness(state, problem);
    r.pinching = check_pinching(state, problem);
    r.mean_curvature = check_mean_curvature(state, problem);
    r.boundary_image_err = boundary_image_err(state, problem);
    r.c = state.c;
    r.residual_interior = state.residual_interior;
    r.residual_boundary = state.residual_boundary;
    r.residual_mean = state.residual_mean;
    r.min_hessian_eig = state.min_hessian_eig;
    r.converged = state.converged;
    r.eps_pos = problem.spec.tol.eps_pos;
    return r;
}

nlohmann::json to_json(const StructureMargins& m) {
    nlohmann::json j;
    j["s1"] = m.s1;
    j["s2"] = m.s2;
    j["samples"] = m.samples;
    j["lambda1"] = m.bounds.lambda1;
    j["lambda2"] = m.bounds.lambda2;
    j["grad_sum_interval"] = {m.bounds.grad_sum.lo, m.bounds.grad_sum.hi};
    j["weighted_sum_interval"] = {m.bounds.weighted_sum.lo, m.bounds.weighted_sum.hi};
    j["grad_sum_slack"] = m.grad_sum_slack;
    j["weighted_sum_slack"] = m.weighted_sum_slack;
    j["monotonicity_min"] = m.monotonicity_min;
    j["concavity_max"] = m.concavity_max;
    j["dual_concavity_max"] = m.dual_concavity_max;
    j["ok"] = m.ok;
    if (!m.ok) j["failing_sample"] = m.failing_sample;
    return j;
}

nlohmann::json to_json(const DiagnosticsReport& r) {
    nlohmann::json j;
    j["c"] = r.c;
    j["converged"] = r.converged;
    j["residual_interior"] = r.residual_interior;
    j["residual_boundary"] = r.residual_boundary;
    j["residual_mean"] = r.residual_mean;
    j["min_hessian_eig"] = r.min_hessian_eig;
    j["obliqueness_min"] = r.obliqueness.min;
    j["obliqueness_identity_err"] = r.obliqueness.identity_err;
    j["obliqueness_worst_node"] = r.obliqueness.worst_node;
    j["pinching"] = {{"mu_hat", r.pinching.mu_hat},
                     {"omega_hat", r.pinching.omega_hat},
                     {"det_min", r.pinching.det_min},
                     {"det_max", r.pinching.det_max},
                     {"det_target", r.pinching.det_target},
                     {"bracketed", r.pinching.bracketed},
                     {"nearest_node", r.pinching.nearest_node},
                     {"nearest_gap", r.pinching.nearest_gap}};
    j["mass_err"] = r.pinching.mass_err;
    j["boundary_image_err"] = r.boundary_image_err;
    j["mean_curvature_err"] = r.mean_curvature.err;
    j["mean_curvature_oracle_gap"] = r.mean_curvature.oracle_gap;
    j["mean_curvature_metric_gap"] = r.mean_curvature.metric_gap;
    if (r.duality) {
        j["duality_roundtrip_err"] = r.duality->roundtrip_err;
        j["c_dual_err"] = r.duality->c_dual_err;
        j["reciprocity_err"] = r.duality->reciprocity_err;
        j["duality_outside_flagged"] = r.duality->outside_flagged;
        j["obliqueness_symmetry_err"] = r.duality->obliqueness_symmetry_err;
    }
    if (r.uniqueness) {
        j["uniqueness_conclusive"] = r.uniqueness->conclusive;
        j["uniqueness_note"] = r.uniqueness->note;
        if (r.uniqueness->conclusive) {
            j["uniqueness_err"] = r.uniqueness->range;
            j["uniqueness_max_diff"] = r.uniqueness->max_diff;
            j["uniqueness_c_diff"] = r.uniqueness->c_diff;
        }
    }
    if (!r.structure.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const StructureMargins& m : r.structure) arr.push_back(to_json(m));
        j["structure_margins"] = arr;
    }
    j["hard_pass"] = r.hard_pass();
    return j;
}

nlohmann::json refinement_delta(const DiagnosticsReport& fine, const DiagnosticsReport& coarse) {
    const auto entry = [](double f, double c) { return nlohmann::json{{"coarse", c}, {"fine", f}, {"delta", f - c}}; };
    nlohmann::json j;
    j["c"] = entry(fine.c, coarse.c);
    j["obliqueness_min"] = entry(fine.obliqueness.min, coarse.obliqueness.min);
    j["obliqueness_identity_err"] = entry(fine.obliqueness.identity_err, coarse.obliqueness.identity_err);
    j["mu_hat"] = entry(fine.pinching.mu_hat, coarse.pinching.mu_hat);
    j["omega_hat"] = entry(fine.pinching.omega_hat, coarse.pinching.omega_hat);
    j["mass_err"] = entry(fine.pinching.mass_err, coarse.pinching.mass_err);
    j["boundary_image_err"] = entry(fine.boundary_image_err, coarse.boundary_image_err);
    j["mean_curvature_err"] = entry(fine.mean_curvature.err, coarse.mean_curvature.err);
    j["mean_curvature_oracle_gap"] = entry(fine.mean_curvature.oracle_gap, coarse.mean_curvature.oracle_gap);
    return j;
}

}  // namespace lagmc
