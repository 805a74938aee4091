#pragma once

#include "lagmc/geometry.hpp"
#include "lagmc/grid.hpp"
#include "lagmc/operators.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <string>
#include <vector>

namespace lagmc {

/// f(x) = f0 + kappa . x + 1/2 x^T Q x. Concave iff Q is negative semidefinite.
struct RightHandSide {
    double f0 = 0.0;
    Vec2 kappa = Vec2::Zero();
    Mat2 quadratic = Mat2::Zero();

    static RightHandSide affine(const Vec2& kappa, double f0 = 0.0) { return {f0, kappa, Mat2::Zero()}; }

    [[nodiscard]] double value(const Vec2& x) const { return f0 + kappa.dot(x) + 0.5 * x.dot(quadratic * x); }
    [[nodiscard]] Vec2 gradient(const Vec2& x) const { return kappa + quadratic * x; }
    [[nodiscard]] const Mat2& hessian() const noexcept { return quadratic; }
    /// True when f is constant; the homotopy is then skipped.
    [[nodiscard]] bool is_constant() const noexcept { return kappa.isZero(0.0) && quadratic.isZero(0.0); }
};

/// Outcome of the admissibility test for f.
struct AdmissibilityReport {
    bool concave = true;
    double concavity_margin = 0.0;  ///< min over nodes of -lambda_max(D^2 f); >= 0 when concave
    int worst_concavity_node = -1;
    Vec2 worst_concavity_point = Vec2::Zero();
    double oscillation = 0.0;       ///< max f - min f over the grid nodes
    double delta_max = 0.0;
    double oscillation_margin = 0.0;  ///< delta_max - oscillation
    int argmax_node = -1;
    int argmin_node = -1;
    bool admissible = true;
    std::string message;
};

/// Checks concavity and osc(f) <= delta_max on the nodes of `grid`; never throws.
[[nodiscard]] AdmissibilityReport assess_f(const RightHandSide& f, const MappedGrid& grid, const OperatorParams& op,
                                           double theta0);
/// As assess_f, but throws AdmissibilityError carrying the report message when f is rejected.
AdmissibilityReport validate_f(const RightHandSide& f, const MappedGrid& grid, const OperatorParams& op, double theta0);

struct Tolerances {
    double residual_tol = 1e-9;  ///< max norm, per block (interior, boundary, mean)
    double step_tol = 1e-14;     ///< Newton stops early if the update is this small relative to |u|
    double eps_pos = 1e-6;       ///< floor on Hessian eigenvalues of accepted states
    int max_newton = 40;
};

struct HomotopyControls {
    double initial_step = 0.25;
    double min_step = 1.0 / 1024.0;
    int max_steps = 400;
    int fast_iterations = 4;  ///< stages converging within this many Newton steps grow the step by 1.5
};

struct ProblemSpec {
    OperatorParams op = OperatorParams::from_tau(1.5707963267948966);
    ConvexDomain source = ConvexDomain::disk({0, 0}, 1.0);
    ConvexDomain target = ConvexDomain::disk({0, 0}, 2.0);
    double source_boost = 1.0;  ///< concavity boost of the source defining function (dual solve)
    double target_boost = 0.5;
    RightHandSide f;
    int n_rho = 32;
    int n_theta = 64;
    Tolerances tol;
    HomotopyControls homotopy;
};

/// Discrete problem on one side of the duality: grid, operator, defining function of the image.
///
/// Primal: F[D^2 u] = t f(x) + c in the source, h_target(Du) = 0 on its boundary.
/// Dual:   Ftilde[D^2 v] = -t f(Dv) - c in the target, h_source(Dv) = 0 on its boundary.
struct Problem {
    ProblemSpec spec;
    Side side = Side::Primal;
    std::shared_ptr<const MappedGrid> grid;
    ConvexDomain image;  ///< prescribed gradient image
    DefiningFunction image_h;
    SpectralOperator op;
    double theta0;

    static Problem primal(const ProblemSpec& spec);
    static Problem dual(const ProblemSpec& spec);
};

/// One accepted continuation stage.
struct PathRecord {
    double t;
    double c;
    double residual_interior;
    double residual_boundary;
    double residual_mean;
    int newton_iters;
    double min_hessian_eig;
    double step;
};

struct SolveState {
    std::shared_ptr<const MappedGrid> grid;
    Eigen::VectorXd u;
    double c = 0.0;
    double t = 0.0;
    double residual_interior = 0.0;
    double residual_boundary = 0.0;
    double residual_mean = 0.0;
    int newton_iters = 0;
    double min_hessian_eig = 0.0;
    int worst_node = -1;
    bool valid = false;      ///< all Hessians above eps_pos
    bool converged = false;  ///< all residual blocks within tolerance
    std::vector<PathRecord> path;

    [[nodiscard]] ScalarField field() const { return ScalarField(grid, u); }
};

/// Stacked residual with its block norms.
struct ResidualEval {
    Eigen::VectorXd r;  ///< interior rows, boundary rows, mean row (node order, then mean)
    double interior = 0.0;
    double boundary = 0.0;
    double mean = 0.0;
    double min_eig = 0.0;
    int worst_node = -1;
    bool convex = false;  ///< every node Hessian has min eigenvalue > eps_pos
};

/// Moment-matched quadratic seed b.x + 1/2 (x - xbar)^T M (x - xbar), M diagonal.
[[nodiscard]] Eigen::VectorXd initial_guess(const MappedGrid& grid, const ConvexDomain& source,
                                            const ConvexDomain& target);
/// Seed state at homotopy parameter t with c set to the mean interior mismatch.
[[nodiscard]] SolveState seed_state(const Problem& problem, const Eigen::VectorXd& u, double t);

/// Residual rows: Op[D^2u] - s (t f + c) on interior nodes (s = +1 primal, -1 dual), h(Du) on
/// boundary nodes, and the quadrature mean of u. Non-convex nodes are reported, not thrown on.
[[nodiscard]] ResidualEval residual(const Problem& problem, const Eigen::VectorXd& u, double c, double t);
[[nodiscard]] ResidualEval residual(const Problem& problem, const SolveState& state);

/// Jacobian in the unknowns (u, c); throws DomainError if a node Hessian is not positive definite.
[[nodiscard]] Eigen::SparseMatrix<double> jacobian(const Problem& problem, const Eigen::VectorXd& u, double c, double t);
[[nodiscard]] Eigen::SparseMatrix<double> jacobian(const Problem& problem, const SolveState& state);

/// One damped Newton step; throws ConvexityBreakdown when no step length is admissible.
[[nodiscard]] SolveState newton_step(const Problem& problem, const SolveState& state);

/// Newton iteration at fixed t until every residual block is within tolerance.
/// Throws ConvexityBreakdown, or NewtonFailure when the iteration limit is hit or it stalls.
[[nodiscard]] SolveState newton_solve(const Problem& problem, SolveState state);

/// Validates f, solves t = 0, then continues to t = 1. Throws AdmissibilityError or ContinuityFailure.
[[nodiscard]] SolveState continuity_solve(const Problem& problem, const Eigen::VectorXd& seed);
[[nodiscard]] SolveState continuity_solve(const Problem& problem);

/// Independent solve of the Legendre-dual problem on the target.
/// The returned state's c is directly comparable with the primal c.
[[nodiscard]] SolveState solve_dual(const ProblemSpec& spec, const SolveState& primal);

/// Seed for the uniqueness check: initial_guess plus a sine bump, halved until it stays convex.
[[nodiscard]] Eigen::VectorXd perturbed_seed(const MappedGrid& grid, const ConvexDomain& source,
                                             const ConvexDomain& target, double amplitude = 0.05);

/// max(|F(0,...)|, |F(inf,...)|) + max |t f| over the grid.
[[nodiscard]] double c_bound(const Problem& problem, double t);

}  // namespace lagmc
