#include "lagmc/operators.hpp"

#include "lagmc/eig.hpp"
#include "lagmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace lagmc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSqrt2 = std::numbers::sqrt2;

// lambda^2 + 2 a lambda + 1, equal to (lambda+a)^2 -+ b^2 on both quotient branches.
double quotient_denominator(const OperatorParams& p, double lam) {
    return lam * lam + 2.0 * p.a() * lam + 1.0;
}

void require_positive(double lam, const char* what) {
    if (!(lam > 0.0)) {
        std::ostringstream os;
        os << what << ": eigenvalue " << lam << " is not in the positive cone";
        throw DomainError(os.str(), lam);
    }
}

void require_nonnegative(double lam, const char* what) {
    if (!(lam >= 0.0)) {
        std::ostringstream os;
        os << what << ": eigenvalue " << lam << " is negative";
        throw DomainError(os.str(), lam);
    }
}

void require_bounded(const OperatorParams& p, const char* what) {
    if (p.branch() == Branch::ExperimentalLogDet) {
        throw DomainError(std::string(what) + ": log-det operator has unbounded limits", 0.0);
    }
}

}  // namespace

std::string_view branch_name(Branch b) {
    switch (b) {
        case Branch::LogQuotient: return "log_quotient";
        case Branch::Harmonic: return "harmonic";
        case Branch::ArctanQuotient: return "arctan_quotient";
        case Branch::Arctan: return "arctan";
        case Branch::ExperimentalLogDet: return "experimental_log_det";
    }
    return "unknown";
}

OperatorParams OperatorParams::from_tau(double tau) {
    if (!std::isfinite(tau) || tau <= 0.0 || tau > 0.5 * kPi + kSeamTolerance) {
        std::ostringstream os;
        os << "tau = " << tau << " outside (0, pi/2]";
        throw DomainError(os.str(), tau);
    }
    OperatorParams p;
    p.tau_ = tau;
    const bool at_right_angle = std::abs(tau - 0.5 * kPi) <= kSeamTolerance;
    p.a_ = at_right_angle ? std::max(0.0, std::cos(tau) / std::sin(tau)) : std::cos(tau) / std::sin(tau);
    p.b_ = std::sqrt(std::abs(p.a_ * p.a_ - 1.0));
    p.scale_ = std::sqrt(p.a_ * p.a_ + 1.0);
    if (std::abs(tau - 0.25 * kPi) <= kSeamTolerance) {
        p.branch_ = Branch::Harmonic;
        p.scale_ = kSqrt2;
    } else if (at_right_angle) {
        p.branch_ = Branch::Arctan;
        p.scale_ = 1.0;
    } else if (tau < 0.25 * kPi) {
        p.branch_ = Branch::LogQuotient;
    } else {
        p.branch_ = Branch::ArctanQuotient;
    }
    return p;
}

OperatorParams OperatorParams::experimental_log_det(int n) {
    if (n < 1) throw DomainError("experimental_log_det: dimension must be positive", n);
    OperatorParams p;
    p.tau_ = 0.0;
    p.a_ = 0.0;
    p.b_ = 0.0;
    p.scale_ = 1.0;
    p.branch_ = Branch::ExperimentalLogDet;
    p.log_det_n_ = n;
    return p;
}

double scalar_phi(const OperatorParams& p, double lam) {
    require_positive(lam, "scalar_phi");
    const double s = p.scale();
    switch (p.branch()) {
        case Branch::LogQuotient:
            // s/(2b) ln((lam+a-b)/(lam+a+b)) = -(s/b) atanh(b/(lam+a))
            return -(s / p.b()) * std::atanh(p.b() / (lam + p.a()));
        case Branch::Harmonic:
            return -kSqrt2 / (1.0 + lam);
        case Branch::ArctanQuotient:
            // s/b arctan((lam+a-b)/(lam+a+b)) - s pi/(4b) = -(s/b) arctan(b/(lam+a))
            return -(s / p.b()) * std::atan(p.b() / (lam + p.a()));
        case Branch::Arctan:
            return std::atan(lam);
        case Branch::ExperimentalLogDet:
            return std::log(lam) / p.log_det_dimension();
    }
    return 0.0;
}

double scalar_dphi(const OperatorParams& p, double lam) {
    switch (p.branch()) {
        case Branch::LogQuotient:
        case Branch::ArctanQuotient:
            require_nonnegative(lam, "scalar_dphi");
            return p.scale() / quotient_denominator(p, lam);
        case Branch::Harmonic:
            require_nonnegative(lam, "scalar_dphi");
            return kSqrt2 / ((1.0 + lam) * (1.0 + lam));
        case Branch::Arctan:
            require_nonnegative(lam, "scalar_dphi");
            return 1.0 / (1.0 + lam * lam);
        case Branch::ExperimentalLogDet:
            require_positive(lam, "scalar_dphi");
            return 1.0 / (p.log_det_dimension() * lam);
    }
    return 0.0;
}

double scalar_d2phi(const OperatorParams& p, double lam) {
    switch (p.branch()) {
        case Branch::LogQuotient:
        case Branch::ArctanQuotient: {
            require_nonnegative(lam, "scalar_d2phi");
            const double d = quotient_denominator(p, lam);
            return -2.0 * p.scale() * (lam + p.a()) / (d * d);
        }
        case Branch::Harmonic:
            require_nonnegative(lam, "scalar_d2phi");
            return -2.0 * kSqrt2 / ((1.0 + lam) * (1.0 + lam) * (1.0 + lam));
        case Branch::Arctan:
            require_nonnegative(lam, "scalar_d2phi");
            return -2.0 * lam / ((1.0 + lam * lam) * (1.0 + lam * lam));
        case Branch::ExperimentalLogDet:
            require_positive(lam, "scalar_d2phi");
            return -1.0 / (p.log_det_dimension() * lam * lam);
    }
    return 0.0;
}

double scalar_phi_at_zero(const OperatorParams& p) {
    require_bounded(p, "scalar_phi_at_zero");
    const double s = p.scale();
    switch (p.branch()) {
        case Branch::LogQuotient: return -(s / p.b()) * std::atanh(p.b() / p.a());
        case Branch::Harmonic: return -kSqrt2;
        case Branch::ArctanQuotient: return -(s / p.b()) * std::atan(p.b() / p.a());
        case Branch::Arctan: return 0.0;
        case Branch::ExperimentalLogDet: break;
    }
    return 0.0;
}

double scalar_phi_at_infinity(const OperatorParams& p) {
    require_bounded(p, "scalar_phi_at_infinity");
    return p.branch() == Branch::Arctan ? 0.5 * kPi : 0.0;
}

double scalar_weighted_dphi_at_infinity(const OperatorParams& p) {
    require_bounded(p, "scalar_weighted_dphi_at_infinity");
    return p.scale();
}

double branch_offset(const OperatorParams& p) {
    return p.branch() == Branch::ArctanQuotient ? p.scale() * kPi / (4.0 * p.b()) : 0.0;
}

double eval_F(const OperatorParams& p, std::span<const double> lambdas) {
    double sum = 0.0;
    for (double lam : lambdas) sum += scalar_phi(p, lam);
    return sum;
}

double eval_F_limit(const OperatorParams& p, std::span<const double> finite, int infinite_count) {
    require_bounded(p, "eval_F_limit");
    if (infinite_count < 0) throw DomainError("eval_F_limit: negative infinite count", infinite_count);
    double sum = infinite_count * scalar_phi_at_infinity(p);
    for (double lam : finite) {
        require_nonnegative(lam, "eval_F_limit");
        sum += lam == 0.0 ? scalar_phi_at_zero(p) : scalar_phi(p, lam);
    }
    return sum;
}

std::vector<double> grad_F(const OperatorParams& p, std::span<const double> lambdas) {
    std::vector<double> out;
    out.reserve(lambdas.size());
    for (double lam : lambdas) {
        require_nonnegative(lam, "grad_F");
        out.push_back(scalar_dphi(p, lam));
    }
    return out;
}

std::vector<double> hess_F_diag(const OperatorParams& p, std::span<const double> lambdas) {
    std::vector<double> out;
    out.reserve(lambdas.size());
    for (double lam : lambdas) {
        require_nonnegative(lam, "hess_F_diag");
        out.push_back(scalar_d2phi(p, lam));
    }
    return out;
}

Limits limits(const OperatorParams& p, int n) {
    return {n * scalar_phi_at_zero(p), n * scalar_phi_at_infinity(p)};
}

double dual_eval(const OperatorParams& p, std::span<const double> mus) {
    double sum = 0.0;
    for (double mu : mus) {
        require_positive(mu, "dual_eval");
        sum -= scalar_phi(p, 1.0 / mu);
    }
    return sum;
}

std::vector<double> dual_grad(const OperatorParams& p, std::span<const double> mus) {
    std::vector<double> out;
    out.reserve(mus.size());
    for (double mu : mus) {
        require_positive(mu, "dual_grad");
        const double lam = 1.0 / mu;
        out.push_back(lam * lam * scalar_dphi(p, lam));
    }
    return out;
}

std::vector<double> dual_hess_diag(const OperatorParams& p, std::span<const double> mus) {
    std::vector<double> out;
    out.reserve(mus.size());
    for (double mu : mus) {
        require_positive(mu, "dual_hess_diag");
        double v = 0.0;
        switch (p.branch()) {
            case Branch::LogQuotient:
            case Branch::ArctanQuotient: {
                const double d = 1.0 + 2.0 * p.a() * mu + mu * mu;
                v = -2.0 * p.scale() * (mu + p.a()) / (d * d);
                break;
            }
            case Branch::Harmonic:
                v = -2.0 * kSqrt2 / ((1.0 + mu) * (1.0 + mu) * (1.0 + mu));
                break;
            case Branch::Arctan:
                v = -2.0 * mu / ((1.0 + mu * mu) * (1.0 + mu * mu));
                break;
            case Branch::ExperimentalLogDet:
                v = -1.0 / (p.log_det_dimension() * mu * mu);
                break;
        }
        out.push_back(v);
    }
    return out;
}

StructureBounds range_bounds(const OperatorParams& p, int n, double s1, double s2) {
    require_bounded(p, "range_bounds");
    if (!(s1 > 0.0) || !(s2 > 0.0)) throw DomainError("range_bounds: s1, s2 must be positive", std::min(s1, s2));
    StructureBounds out{};
    out.s1 = s1;
    out.s2 = s2;
    out.grad_sum = {scalar_dphi(p, s1), n * scalar_dphi(p, 0.0)};
    out.weighted_sum = {s2 * s2 * scalar_dphi(p, s2), n * scalar_weighted_dphi_at_infinity(p)};
    out.lambda1 = std::min(out.grad_sum.lo, out.weighted_sum.lo);
    out.lambda2 = std::max(out.grad_sum.hi, out.weighted_sum.hi);
    return out;
}

double delta_max(const OperatorParams& p, double theta0, int n) {
    if (!(theta0 > 0.0)) throw DomainError("delta_max: theta0 must be positive", theta0);
    std::vector<double> theta_only{theta0};
    std::vector<double> zeros_and_theta(static_cast<std::size_t>(n - 1), 0.0);
    zeros_and_theta.push_back(theta0);
    const std::vector<double> zeros(static_cast<std::size_t>(n), 0.0);
    const double upper_gap = eval_F_limit(p, {}, n) - eval_F_limit(p, theta_only, n - 1);
    const double lower_gap = eval_F_limit(p, zeros_and_theta, 0) - eval_F_limit(p, zeros, 0);
    return std::min(upper_gap, lower_gap);
}

namespace {

struct Decomposition {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

Decomposition decompose(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DomainError("matrix operator: argument is not square", a.rows());
    const Eigen::MatrixXd s = 0.5 * (a + a.transpose());
    Decomposition d;
    switch (a.rows()) {
        case 1:
            d.values = s.diagonal();
            d.vectors = Eigen::MatrixXd::Identity(1, 1);
            break;
        case 2: {
            const Eig2 e = eig2(s);
            d.values = Eigen::Vector2d(e.lo, e.hi);
            d.vectors = e.rotation;
            break;
        }
        case 3: {
            const Eig3 e = eig3(s);
            d.values = e.values;
            d.vectors = e.vectors;
            break;
        }
        default:
            throw DomainError("matrix operator: dimension > 3 is not supported", a.rows());
    }
    const double min_eig = d.values.minCoeff();
    if (!(min_eig > 0.0)) {
        std::ostringstream os;
        os << "matrix operator: argument is not positive definite (minimum eigenvalue " << min_eig << ")";
        throw DomainError(os.str(), min_eig);
    }
    return d;
}

}  // namespace

double eval_F_matrix(const OperatorParams& p, const Eigen::MatrixXd& a) {
    const Decomposition d = decompose(a);
    return eval_F(p, std::span<const double>(d.values.data(), static_cast<std::size_t>(d.values.size())));
}

Eigen::MatrixXd dF_matrix(const OperatorParams& p, const Eigen::MatrixXd& a) {
    const Decomposition d = decompose(a);
    Eigen::VectorXd g(d.values.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = scalar_dphi(p, d.values(i));
    return d.vectors * g.asDiagonal() * d.vectors.transpose();
}

double SpectralOperator::phi(double x) const {
    return side_ == Side::Primal ? scalar_phi(params_, x) : -scalar_phi(params_, 1.0 / x);
}

double SpectralOperator::dphi(double x) const {
    if (side_ == Side::Primal) return scalar_dphi(params_, x);
    require_positive(x, "dual dphi");
    const double lam = 1.0 / x;
    return lam * lam * scalar_dphi(params_, lam);
}

SpectralValue2 SpectralOperator::evaluate(const Eigen::Matrix2d& a) const {
    const Eig2 e = eig2(a);
    if (!(e.lo > 0.0)) {
        std::ostringstream os;
        os << "spectral operator: Hessian not positive definite (minimum eigenvalue " << e.lo << ")";
        throw DomainError(os.str(), e.lo);
    }
    SpectralValue2 out;
    out.value = phi(e.lo) + phi(e.hi);
    const double g_lo = dphi(e.lo);
    const double g_hi = dphi(e.hi);
    const Eigen::Vector2d v_lo = e.rotation.col(0);
    const Eigen::Vector2d v_hi = e.rotation.col(1);
    out.derivative = g_lo * v_lo * v_lo.transpose() + g_hi * v_hi * v_hi.transpose();
    out.min_eig = e.lo;
    out.max_eig = e.hi;
    return out;
}

Limits SpectralOperator::limits(int n) const {
    const Limits primal = lagmc::limits(params_, n);
    if (side_ == Side::Primal) return primal;
    return {-primal.at_infinity, -primal.at_zero};
}

}  // namespace lagmc
