#pragma once

#include <stdexcept>
#include <string>

namespace lagmc {

/// Argument outside the domain of an operator (e.g. an eigenvalue <= 0).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what, double offending = 0.0)
        : std::domain_error(what), offending_(offending) {}

    /// The value that violated the domain (minimum eigenvalue, lambda, tau, ...).
    [[nodiscard]] double offending() const noexcept { return offending_; }

private:
    double offending_;
};

/// Invalid domain construction or a failed boundary projection.
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Right-hand side outside the admissible class (not concave, or oscillation too large).
class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No damping factor keeps the iterate uniformly convex and decreases the residual.
class ConvexityBreakdown : public std::runtime_error {
public:
    ConvexityBreakdown(const std::string& what, std::size_t worst_node, double worst_eig)
        : std::runtime_error(what), worst_node_(worst_node), worst_eig_(worst_eig) {}

    [[nodiscard]] std::size_t worst_node() const noexcept { return worst_node_; }
    [[nodiscard]] double worst_eigenvalue() const noexcept { return worst_eig_; }

private:
    std::size_t worst_node_;
    double worst_eig_;
};

/// Newton iteration at a fixed homotopy parameter did not reach tolerance.
class NewtonFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Homotopy step underflow; carries the last parameter value that was solved.
class ContinuityFailure : public std::runtime_error {
public:
    ContinuityFailure(const std::string& what, double last_good_t)
        : std::runtime_error(what), last_good_t_(last_good_t) {}

    /// Negative when not even t = 0 could be solved.
    [[nodiscard]] double last_good_t() const noexcept { return last_good_t_; }

private:
    double last_good_t_;
};

/// Malformed or incomplete run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lagmc
