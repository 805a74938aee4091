#include "lagmc/solver.hpp"

#include "lagmc/eig.hpp"
#include "lagmc/errors.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lagmc {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 20;

double side_sign(const Problem& p) { return p.side == Side::Primal ? 1.0 : -1.0; }

// Argument of f at a node: x itself on the primal side, the gradient on the dual side.
Vec2 f_argument(const Problem& p, int k, const std::vector<Vec2>& grad) {
    return p.side == Side::Primal ? p.grid->node(k) : grad[k];
}

bool within_tolerance(const Problem& p, const ResidualEval& e) {
    const double tol = p.spec.tol.residual_tol;
    return e.convex && e.interior <= tol && e.boundary <= tol && e.mean <= tol;
}

void record(SolveState& s, const ResidualEval& e, double eps_pos, double tol) {
    s.residual_interior = e.interior;
    s.residual_boundary = e.boundary;
    s.residual_mean = e.mean;
    s.min_hessian_eig = e.min_eig;
    s.worst_node = e.worst_node;
    s.valid = e.min_eig > eps_pos;
    s.converged = s.valid && e.interior <= tol && e.boundary <= tol && e.mean <= tol;
}

// max |f| over the source domain, sampled on a polar pattern (f is smooth; the
// dual side evaluates f on the source, which is the image of its gradient).
double max_abs_f(const ProblemSpec& spec) {
    const ConvexDomain& d = spec.source;
    double m = std::abs(spec.f.value(d.origin()));
    constexpr int kRings = 16;
    constexpr int kRays = 128;
    for (int i = 1; i <= kRings; ++i) {
        for (int j = 0; j < kRays; ++j) {
            const double th = 2.0 * std::numbers::pi * j / kRays;
            const Vec2 x = d.origin() + (static_cast<double>(i) / kRings) * d.radius(th) * Vec2(std::cos(th), std::sin(th));
            m = std::max(m, std::abs(spec.f.value(x)));
        }
    }
    return m;
}

}  // namespace

AdmissibilityReport assess_f(const RightHandSide& f, const MappedGrid& grid, const OperatorParams& op, double theta0) {
    AdmissibilityReport rep;
    rep.concavity_margin = std::numeric_limits<double>::infinity();
    double fmax = -std::numeric_limits<double>::infinity();
    double fmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid.size(); ++k) {
        const Vec2& x = grid.node(k);
        const double margin = -eigenvalues2(f.hessian())(1);
        if (margin < rep.concavity_margin) {
            rep.concavity_margin = margin;
            rep.worst_concavity_node = k;
            rep.worst_concavity_point = x;
        }
        const double v = f.value(x);
        if (v > fmax) {
            fmax = v;
            rep.argmax_node = k;
        }
        if (v < fmin) {
            fmin = v;
            rep.argmin_node = k;
        }
    }
    rep.concave = rep.concavity_margin >= 0.0;
    rep.oscillation = fmax - fmin;
    rep.delta_max = delta_max(op, theta0, 2);
    rep.oscillation_margin = rep.delta_max - rep.oscillation;
    rep.admissible = rep.concave && rep.oscillation_margin >= 0.0;
    std::ostringstream os;
    os.precision(6);
    if (!rep.concave) {
        os << "f is not concave: D^2f has eigenvalue " << -rep.concavity_margin << " > 0 at node "
           << rep.worst_concavity_node << " (" << rep.worst_concavity_point.x() << ", " << rep.worst_concavity_point.y()
           << ")";
    } else if (rep.oscillation_margin < 0.0) {
        os << "osc(f) = " << rep.oscillation << " exceeds delta_max = " << rep.delta_max << " by "
           << -rep.oscillation_margin << " (admissible class requires osc(f) <= delta_max; margin "
           << rep.oscillation_margin << ")";
    } else {
        os << "admissible: concavity margin " << rep.concavity_margin << ", oscillation margin "
           << rep.oscillation_margin;
    }
    rep.message = os.str();
    return rep;
}

AdmissibilityReport validate_f(const RightHandSide& f, const MappedGrid& grid, const OperatorParams& op, double theta0) {
    AdmissibilityReport rep = assess_f(f, grid, op, theta0);
    if (!rep.admissible) throw AdmissibilityError(rep.message);
    return rep;
}

Problem Problem::primal(const ProblemSpec& spec) {
    return Problem{spec,
                   Side::Primal,
                   MappedGrid::build(spec.source, spec.n_rho, spec.n_theta),
                   spec.target,
                   defining_function(spec.target, spec.target_boost),
                   SpectralOperator(spec.op, Side::Primal),
                   lagmc::theta0(spec.source, spec.target, 2)};
}

Problem Problem::dual(const ProblemSpec& spec) {
    return Problem{spec,
                   Side::Dual,
                   MappedGrid::build(spec.target, spec.n_rho, spec.n_theta),
                   spec.source,
                   defining_function(spec.source, spec.source_boost),
                   SpectralOperator(spec.op, Side::Dual),
                   lagmc::theta0(spec.target, spec.source, 2)};
}

Eigen::VectorXd initial_guess(const MappedGrid& grid, const ConvexDomain& source, const ConvexDomain& target) {
    const Vec2& xbar = source.barycenter();
    const Vec2& bt = target.barycenter();
    const Mat2& cs = source.covariance();
    const Mat2& ct = target.covariance();
    const Vec2 m(std::sqrt(ct(0, 0) / cs(0, 0)), std::sqrt(ct(1, 1) / cs(1, 1)));
    Eigen::VectorXd u(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const Vec2 d = grid.node(k) - xbar;
        u[k] = bt.dot(grid.node(k)) + 0.5 * (m.x() * d.x() * d.x() + m.y() * d.y() * d.y());
    }
    return u;
}

Eigen::VectorXd perturbed_seed(const MappedGrid& grid, const ConvexDomain& source, const ConvexDomain& target,
                               double amplitude) {
    const Eigen::VectorXd base = initial_guess(grid, source, target);
    const auto min_eig = [&](const Eigen::VectorXd& u) {
        double m = std::numeric_limits<double>::infinity();
        for (const Mat2& h : hessian(grid, u)) m = std::min(m, eigenvalues2(h)(0));
        return m;
    };
    const double floor = 0.5 * min_eig(base);
    const double len = source.max_radius();
    Eigen::VectorXd bump(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
        const Vec2 d = (grid.node(k) - source.barycenter()) / len;
        bump[k] = len * len * std::sin(2.0 * d.x() + 0.3) * std::cos(1.5 * d.y());
    }
    for (double a = amplitude; a > 1e-6; a *= 0.5) {
        const Eigen::VectorXd u = base + a * bump;
        if (min_eig(u) >= floor) return u;
    }
    return base;
}

ResidualEval residual(const Problem& p, const Eigen::VectorXd& u, double c, double t) {
    const MappedGrid& g = *p.grid;
    const int n = g.size();
    const double sigma = side_sign(p);
    const std::vector<Mat2> hs = hessian(g, u);
    const std::vector<Vec2> gs = gradient(g, u);
    ResidualEval e;
    e.r.resize(n + 1);
    e.min_eig = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
        const double lo = eigenvalues2(hs[k])(0);
        if (lo < e.min_eig) {
            e.min_eig = lo;
            e.worst_node = k;
        }
    }
    e.convex = e.min_eig > p.spec.tol.eps_pos;
    for (int k : g.interior_nodes()) {
        double v = std::numeric_limits<double>::quiet_NaN();
        if (eigenvalues2(hs[k])(0) > 0.0) {
            v = p.op.evaluate(hs[k]).value - sigma * (t * p.spec.f.value(f_argument(p, k, gs)) + c);
        }
        e.r[k] = v;
        e.interior = std::max(e.interior, std::isnan(v) ? std::numeric_limits<double>::infinity() : std::abs(v));
    }
    for (int k : g.boundary_nodes()) {
        e.r[k] = p.image_h.value(gs[k]);
        e.boundary = std::max(e.boundary, std::abs(e.r[k]));
    }
    e.r[n] = g.quadrature_weights().dot(u) / g.domain().area();
    e.mean = std::abs(e.r[n]);
    return e;
}

ResidualEval residual(const Problem& p, const SolveState& s) { return residual(p, s.u, s.c, s.t); }

Eigen::SparseMatrix<double> jacobian(const Problem& p, const Eigen::VectorXd& u, double /*c*/, double t) {
    const MappedGrid& g = *p.grid;
    const int n = g.size();
    const double sigma = side_sign(p);
    const std::vector<Mat2> hs = hessian(g, u);
    const std::vector<Vec2> gs = gradient(g, u);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 26 + 2 * n);
    for (int k : g.interior_nodes()) {
        const SpectralValue2 sv = p.op.evaluate(hs[k]);
        const Mat2& d = sv.derivative;
        const NodeStencil& st = g.stencil(k);
        // Dual side: -sigma t f(Du) contributes -sigma t f_p . D(du).
        Vec2 fp = Vec2::Zero();
        if (p.side == Side::Dual) fp = -sigma * t * p.spec.f.gradient(gs[k]);
        for (std::size_t r = 0; r < st.nodes.size(); ++r) {
            const double w = d(0, 0) * st.hxx[r] + 2.0 * d(0, 1) * st.hxy[r] + d(1, 1) * st.hyy[r] + fp.x() * st.gx[r] +
                             fp.y() * st.gy[r];
            trip.emplace_back(k, st.nodes[r], w);
        }
        trip.emplace_back(k, n, -sigma);
    }
    for (int k : g.boundary_nodes()) {
        const Vec2 beta = p.image_h.eval(gs[k]).gradient;
        const NodeStencil& st = g.stencil(k);
        for (std::size_t r = 0; r < st.nodes.size(); ++r) {
            trip.emplace_back(k, st.nodes[r], beta.x() * st.gx[r] + beta.y() * st.gy[r]);
        }
    }
    const Eigen::VectorXd& w = g.quadrature_weights();
    const double area = g.domain().area();
    for (int k = 0; k < n; ++k) {
        if (w[k] != 0.0) trip.emplace_back(n, k, w[k] / area);
    }
    Eigen::SparseMatrix<double> j(n + 1, n + 1);
    j.setFromTriplets(trip.begin(), trip.end());
    return j;
}

Eigen::SparseMatrix<double> jacobian(const Problem& p, const SolveState& s) { return jacobian(p, s.u, s.c, s.t); }

SolveState seed_state(const Problem& p, const Eigen::VectorXd& u, double t) {
    SolveState s;
    s.grid = p.grid;
    s.u = u;
    s.t = t;
    const MappedGrid& g = *p.grid;
    const std::vector<Mat2> hs = hessian(g, u);
    const std::vector<Vec2> gs = gradient(g, u);
    const double sigma = side_sign(p);
    double acc = 0.0;
    int count = 0;
    for (int k : g.interior_nodes()) {
        if (!(eigenvalues2(hs[k])(0) > 0.0)) continue;
        acc += sigma * p.op.evaluate(hs[k]).value - t * p.spec.f.value(f_argument(p, k, gs));
        ++count;
    }
    s.c = count > 0 ? acc / count : 0.0;
    // Shift to zero discrete mean so the mean row starts satisfied.
    s.u.array() -= g.quadrature_weights().dot(s.u) / g.domain().area();
    record(s, residual(p, s), p.spec.tol.eps_pos, p.spec.tol.residual_tol);
    return s;
}

SolveState newton_step(const Problem& p, const SolveState& s) {
    const ResidualEval r0 = residual(p, s);
    if (!r0.convex) {
        std::ostringstream os;
        os << "newton_step: current state is not uniformly convex (min eigenvalue " << r0.min_eig << " at node "
           << r0.worst_node << ")";
        throw ConvexityBreakdown(os.str(), static_cast<std::size_t>(std::max(0, r0.worst_node)), r0.min_eig);
    }
    const Eigen::SparseMatrix<double> j = jacobian(p, s);
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(j);
    lu.factorize(j);
    if (lu.info() != Eigen::Success) {
        throw ConvexityBreakdown("newton_step: linearized operator is singular", 0, r0.min_eig);
    }
    const Eigen::VectorXd delta = lu.solve(-r0.r);
    if (lu.info() != Eigen::Success || !delta.allFinite()) {
        throw ConvexityBreakdown("newton_step: linear solve failed", 0, r0.min_eig);
    }
    const int n = p.grid->size();
    const double norm0 = r0.r.norm();
    int worst = r0.worst_node;
    double worst_eig = r0.min_eig;
    double alpha = 1.0;
    for (int h = 0; h <= kMaxHalvings; ++h, alpha *= 0.5) {
        SolveState trial = s;
        trial.u = s.u + alpha * delta.head(n);
        trial.c = s.c + alpha * delta[n];
        const ResidualEval e = residual(p, trial);
        if (!e.convex) {
            worst = e.worst_node;
            worst_eig = e.min_eig;
            continue;
        }
        const bool armijo = e.r.norm() <= (1.0 - kArmijo * alpha) * norm0;
        if (armijo || (h == 0 && within_tolerance(p, e))) {
            trial.newton_iters = s.newton_iters + 1;
            record(trial, e, p.spec.tol.eps_pos, p.spec.tol.residual_tol);
            return trial;
        }
    }
    std::ostringstream os;
    os << "convexity breakdown at t = " << s.t << ": no damping factor in {1, ..., 2^-" << kMaxHalvings
       << "} keeps the iterate convex and reduces the residual; worst node " << worst << " (min eigenvalue "
       << worst_eig << ")";
    throw ConvexityBreakdown(os.str(), static_cast<std::size_t>(std::max(0, worst)), worst_eig);
}

SolveState newton_solve(const Problem& p, SolveState s) {
    const int start_iters = s.newton_iters;
    ResidualEval e = residual(p, s);
    record(s, e, p.spec.tol.eps_pos, p.spec.tol.residual_tol);
    while (!within_tolerance(p, e)) {
        if (s.newton_iters - start_iters >= p.spec.tol.max_newton) {
            std::ostringstream os;
            os << "Newton did not converge in " << p.spec.tol.max_newton << " iterations at t = " << s.t
               << " (interior " << e.interior << ", boundary " << e.boundary << ", mean " << e.mean << ")";
            throw NewtonFailure(os.str());
        }
        SolveState next = newton_step(p, s);
        const double change = (next.u - s.u).lpNorm<Eigen::Infinity>();
        const double scale = 1.0 + s.u.lpNorm<Eigen::Infinity>();
        s = std::move(next);
        e = residual(p, s);
        if (change <= p.spec.tol.step_tol * scale && !within_tolerance(p, e)) {
            std::ostringstream os;
            os << "Newton stalled at t = " << s.t << " (interior " << e.interior << ", boundary " << e.boundary
               << ", mean " << e.mean << ")";
            throw NewtonFailure(os.str());
        }
    }
    record(s, e, p.spec.tol.eps_pos, p.spec.tol.residual_tol);
    return s;
}

namespace {

PathRecord path_record(const SolveState& s, int iters, double step) {
    return {s.t, s.c, s.residual_interior, s.residual_boundary, s.residual_mean, iters, s.min_hessian_eig, step};
}

SolveState continue_path(const Problem& p, const Eigen::VectorXd& seed) {
    SolveState s = seed_state(p, seed, 0.0);
    try {
        const int before = s.newton_iters;
        s = newton_solve(p, s);
        s.path.push_back(path_record(s, s.newton_iters - before, 0.0));
    } catch (const std::exception& ex) {
        throw ContinuityFailure(std::string("continuation failed at t = 0: ") + ex.what(), -1.0);
    }
    if (p.spec.f.is_constant()) {
        // t only scales f; a constant is absorbed into c.
        s.t = 1.0;
        s.c -= p.spec.f.f0;
        record(s, residual(p, s), p.spec.tol.eps_pos, p.spec.tol.residual_tol);
        s.path.push_back(path_record(s, 0, 1.0));
        return s;
    }
    const HomotopyControls& hc = p.spec.homotopy;
    double step = hc.initial_step;
    int stages = 0;
    while (s.t < 1.0) {
        if (++stages > hc.max_steps) {
            std::ostringstream os;
            os << "continuation exceeded " << hc.max_steps << " stages; last good t = " << s.t;
            throw ContinuityFailure(os.str(), s.t);
        }
        const double t_next = std::min(1.0, s.t + step);
        SolveState trial = s;
        trial.t = t_next;
        try {
            const int before = trial.newton_iters;
            trial = newton_solve(p, trial);
            const int iters = trial.newton_iters - before;
            trial.path.push_back(path_record(trial, iters, t_next - s.t));
            s = std::move(trial);
            if (iters <= hc.fast_iterations) step *= 1.5;
        } catch (const std::exception& ex) {
            step *= 0.5;
            if (step < hc.min_step) {
                std::ostringstream os;
                os << "continuation step fell below " << hc.min_step << "; last good t = " << s.t << " (" << ex.what()
                   << ")";
                throw ContinuityFailure(os.str(), s.t);
            }
        }
    }
    return s;
}

}  // namespace

SolveState continuity_solve(const Problem& p, const Eigen::VectorXd& seed) {
    if (p.side == Side::Primal) validate_f(p.spec.f, *p.grid, p.spec.op, p.theta0);
    return continue_path(p, seed);
}

SolveState continuity_solve(const Problem& p) {
    const Eigen::VectorXd seed = p.side == Side::Primal ? initial_guess(*p.grid, p.spec.source, p.spec.target)
                                                        : initial_guess(*p.grid, p.spec.target, p.spec.source);
    return continuity_solve(p, seed);
}

SolveState solve_dual(const ProblemSpec& spec, const SolveState& primal) {
    if (!primal.converged) throw std::invalid_argument("solve_dual: primal state has not converged");
    const Problem dual = Problem::dual(spec);
    return continuity_solve(dual);
}

double c_bound(const Problem& p, double t) {
    const Limits l = lagmc::limits(p.spec.op, 2);
    return std::max(std::abs(l.at_zero), std::abs(l.at_infinity)) + std::abs(t) * max_abs_f(p.spec);
}

}  // namespace lagmc
