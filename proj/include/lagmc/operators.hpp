#pragma once

#include <Eigen/Dense>

#include <span>
#include <string_view>
#include <vector>

namespace lagmc {

/// Formula selected by the angle tau.
enum class Branch {
    LogQuotient,        ///< 0 < tau < pi/4
    Harmonic,           ///< tau = pi/4
    ArctanQuotient,     ///< pi/4 < tau < pi/2
    Arctan,             ///< tau = pi/2
    ExperimentalLogDet  ///< tau = 0, only through OperatorParams::experimental_log_det
};

[[nodiscard]] std::string_view branch_name(Branch b);

/// Angles within this distance of pi/4 or pi/2 select the Harmonic or Arctan formula.
inline constexpr double kSeamTolerance = 1e-8;

/// Branch descriptor of the operator family F_tau.
///
/// `a = cot tau` and `b = sqrt|cot^2 tau - 1|` are always computed from the stored tau;
/// the seam rule only decides which closed form is evaluated.
class OperatorParams {
public:
    /// tau in (0, pi/2]; throws DomainError otherwise.
    static OperatorParams from_tau(double tau);

    /// (1/n) sum ln(lambda_i). Never selected by from_tau.
    static OperatorParams experimental_log_det(int n);

    [[nodiscard]] double tau() const noexcept { return tau_; }
    [[nodiscard]] double a() const noexcept { return a_; }
    [[nodiscard]] double b() const noexcept { return b_; }
    [[nodiscard]] Branch branch() const noexcept { return branch_; }
    /// sqrt(a^2 + 1) = 1 / sin(tau).
    [[nodiscard]] double scale() const noexcept { return scale_; }
    /// Dimension baked into the log-det normalization (0 for the other branches).
    [[nodiscard]] int log_det_dimension() const noexcept { return log_det_n_; }

private:
    OperatorParams() = default;

    double tau_ = 0.0;
    double a_ = 0.0;
    double b_ = 0.0;
    double scale_ = 1.0;
    Branch branch_ = Branch::Arctan;
    int log_det_n_ = 0;
};

// ---- per-eigenvalue summand -------------------------------------------------

/// Summand phi(lam) with F = sum_i phi(lam_i). lam > 0 required.
[[nodiscard]] double scalar_phi(const OperatorParams& p, double lam);
/// phi'(lam); lam >= 0 accepted (limit at zero is finite).
[[nodiscard]] double scalar_dphi(const OperatorParams& p, double lam);
/// phi''(lam); lam >= 0 accepted.
[[nodiscard]] double scalar_d2phi(const OperatorParams& p, double lam);
/// lim_{lam -> 0+} phi(lam).
[[nodiscard]] double scalar_phi_at_zero(const OperatorParams& p);
/// lim_{lam -> +inf} phi(lam).
[[nodiscard]] double scalar_phi_at_infinity(const OperatorParams& p);
/// lim_{lam -> +inf} lam^2 phi'(lam).
[[nodiscard]] double scalar_weighted_dphi_at_infinity(const OperatorParams& p);

/// Per-eigenvalue constant separating the implemented summand from the textbook
/// closed form: textbook_phi = scalar_phi + branch_offset. Nonzero only for
/// ArctanQuotient, whose textbook form carries sqrt(a^2+1) pi / (4b), a constant
/// that diverges at the pi/4 seam.
[[nodiscard]] double branch_offset(const OperatorParams& p);

// ---- spectrum functions -----------------------------------------------------

/// F(lambda) = sum phi(lambda_i); every entry must be > 0.
[[nodiscard]] double eval_F(const OperatorParams& p, std::span<const double> lambdas);

/// Limit evaluation: `finite` entries may be 0, plus `infinite_count` entries at +infinity.
[[nodiscard]] double eval_F_limit(const OperatorParams& p, std::span<const double> finite, int infinite_count);

[[nodiscard]] std::vector<double> grad_F(const OperatorParams& p, std::span<const double> lambdas);
/// Entries may be 0 (the derivatives extend continuously to the closed cone).
/// Diagonal of the Hessian in lambda; off-diagonal entries vanish identically.
[[nodiscard]] std::vector<double> hess_F_diag(const OperatorParams& p, std::span<const double> lambdas);

struct Limits {
    double at_zero;
    double at_infinity;
};

/// F(0,...,0) and F(+inf,...,+inf) in dimension n.
[[nodiscard]] Limits limits(const OperatorParams& p, int n);

/// Dual operator Ftilde(mu) = -F(1/mu_1, ..., 1/mu_n).
[[nodiscard]] double dual_eval(const OperatorParams& p, std::span<const double> mus);
/// dFtilde/dmu_i = lambda_i^2 dF/dlambda_i with lambda_i = 1/mu_i.
[[nodiscard]] std::vector<double> dual_grad(const OperatorParams& p, std::span<const double> mus);
[[nodiscard]] std::vector<double> dual_hess_diag(const OperatorParams& p, std::span<const double> mus);

struct Interval {
    double lo;
    double hi;
    [[nodiscard]] bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Uniform bounds on the truncated cone {min lambda <= s1, max lambda >= s2}.
struct StructureBounds {
    double lambda1;          ///< min of the two lower endpoints
    double lambda2;          ///< max of the two upper endpoints
    double s1;
    double s2;
    Interval grad_sum;       ///< range of sum dF/dlambda_i
    Interval weighted_sum;   ///< range of sum dF/dlambda_i lambda_i^2
};

[[nodiscard]] StructureBounds range_bounds(const OperatorParams& p, int n, double s1, double s2);

/// Admissible oscillation bound
/// min{F(inf,...,inf) - F(theta0,inf,...,inf), F(0,...,0,theta0) - F(0,...,0)}.
[[nodiscard]] double delta_max(const OperatorParams& p, double theta0, int n);

// ---- matrix arguments -------------------------------------------------------

/// F[A] = F(lambda(A)) for symmetric positive definite A (n <= 3).
[[nodiscard]] double eval_F_matrix(const OperatorParams& p, const Eigen::MatrixXd& a);
/// F^{ij} = dF/da_ij = Q diag(grad_F) Q^T.
[[nodiscard]] Eigen::MatrixXd dF_matrix(const OperatorParams& p, const Eigen::MatrixXd& a);

/// Which of the two Legendre-dual problems an operator acts on.
enum class Side { Primal, Dual };

/// Value and first variation of a spectral operator at a 2x2 Hessian.
struct SpectralValue2 {
    double value;
    Eigen::Matrix2d derivative;  ///< d value / d A_ij (symmetric)
    double min_eig;
    double max_eig;
};

/// F (primal) or Ftilde (dual) acting on symmetric 2x2 matrices, as used by the solver.
class SpectralOperator {
public:
    SpectralOperator(OperatorParams params, Side side) : params_(params), side_(side) {}

    [[nodiscard]] const OperatorParams& params() const noexcept { return params_; }
    [[nodiscard]] Side side() const noexcept { return side_; }

    /// Summand of this side's operator and its derivative.
    [[nodiscard]] double phi(double x) const;
    [[nodiscard]] double dphi(double x) const;

    /// Throws DomainError (carrying the minimum eigenvalue) unless A is positive definite.
    [[nodiscard]] SpectralValue2 evaluate(const Eigen::Matrix2d& a) const;

    /// Limits of this side's operator in dimension n.
    [[nodiscard]] Limits limits(int n) const;

private:
    OperatorParams params_;
    Side side_;
};

}  // namespace lagmc
