#pragma once

#include "lagmc/operators.hpp"
#include "lagmc/solver.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lagmc {

struct ObliquenessResult {
    double min = 0.0;           ///< min over boundary nodes of <beta, nu>, nu the inward normal
    double identity_err = 0.0;  ///< max |<beta, nu> - sqrt(beta^T D^2u beta  nu^T (D^2u)^-1 nu)|
    int worst_node = -1;
    std::vector<double> values;  ///< <beta, nu> per boundary node, in boundary_nodes() order
};

/// beta = Dh(Du) against the inward normal of the source at each boundary node.
[[nodiscard]] ObliquenessResult check_obliqueness(const SolveState& state, const Problem& problem);

struct PinchingResult {
    double mu_hat = 0.0;     ///< max over nodes of lambda_min
    double omega_hat = 0.0;  ///< min over nodes of lambda_max
    double det_min = 0.0;
    double det_max = 0.0;
    double det_target = 0.0;  ///< theta0^n
    bool bracketed = false;   ///< det - theta0^n changes sign over the nodes (or hits zero)
    int nearest_node = -1;    ///< node minimizing |det - theta0^n|
    double nearest_gap = 0.0;
    double mass_err = 0.0;  ///< |int det D^2u - |image|| / |image|
};

[[nodiscard]] PinchingResult check_pinching(const SolveState& state, const Problem& problem);

struct MeanCurvatureResult {
    double err = 0.0;         ///< max_k max_x |g^{ij} u_{ijk} - f_k|
    double oracle_gap = 0.0;  ///< max_k max_x |g^{ij} u_{ijk} - D_k(F[D^2u])|
    double metric_gap = 0.0;  ///< max_k max_x |g^{ij} u_{ijk} - F^{ij} u_{ijk}| (primal side)
    int worst_node = -1;
    int nodes_used = 0;
};

/// Metric g = sin(tau)(I + H^2) + 2 cos(tau) H contracted with third derivatives on nodes at
/// least two rings from the boundary. The oracle differentiates the nodal values of F[D^2u].
[[nodiscard]] MeanCurvatureResult check_mean_curvature(const SolveState& state, const Problem& problem);

/// g_ij for a Hessian H.
[[nodiscard]] Mat2 induced_metric(const OperatorParams& op, const Mat2& h);

struct DualityResult {
    double roundtrip_err = 0.0;  ///< max over interior nodes of |Dv(Du(x)) - x|
    double c_dual_err = 0.0;
    double reciprocity_err = 0.0;  ///< max |lambda_i(D^2u) lambda_{n+1-i}(D^2v o Du) - 1| on sampled nodes
    int reciprocity_samples = 0;
    double max_outside = 0.0;  ///< largest distance of Du(x) outside the target
    int outside_flagged = 0;   ///< nodes with Du(x) more than h^2 outside the target
    double obliqueness_symmetry_err = 0.0;  ///< |<beta~, nu~> - <beta, nu>| at matched boundary points
};

/// `dual_problem` is Problem::dual of the same spec; `seed` drives the reciprocity node sample.
[[nodiscard]] DualityResult check_duality(const SolveState& primal, const SolveState& dual, const Problem& problem,
                                          const Problem& dual_problem, std::uint64_t seed = 1);

struct UniquenessResult {
    bool conclusive = false;
    std::string note;
    double range = 0.0;     ///< max - min of u1 - u2 after mean normalization
    double max_diff = 0.0;  ///< max |u1 - u2|
    double c_diff = 0.0;
    double boundary_image_err_a = 0.0;
    double boundary_image_err_b = 0.0;
};

/// Solves from the moment-matched seed and from perturbed_seed and compares.
[[nodiscard]] UniquenessResult check_uniqueness(const Problem& problem);
/// Compares an existing solution with a solve started from perturbed_seed.
[[nodiscard]] UniquenessResult check_uniqueness(const Problem& problem, const SolveState& reference);

/// max over boundary nodes of dist(Du(x), boundary of the image).
[[nodiscard]] double boundary_image_err(const SolveState& state, const Problem& problem);

struct StructureMargins {
    double s1 = 0.0;
    double s2 = 0.0;
    int samples = 0;
    StructureBounds bounds{};
    double grad_sum_slack = 0.0;      ///< min over samples of distance inside the grad_sum interval
    double weighted_sum_slack = 0.0;  ///< same for sum dF/dlambda_i lambda_i^2
    double monotonicity_min = 0.0;    ///< min dF/dlambda_i
    double concavity_max = 0.0;       ///< max d^2F/dlambda_i^2 (diagonal Hessian)
    double dual_concavity_max = 0.0;  ///< max d^2Ftilde/dmu_i^2
    bool ok = false;
    std::vector<double> failing_sample;  ///< first violating spectrum, empty when ok
};

/// Halton samples of the truncated cone {0 < min lambda <= s1, max lambda >= s2} in dimension n.
[[nodiscard]] StructureMargins verify_structure_conditions(const OperatorParams& params, double s1, double s2,
                                                           int samples, int n = 2);

struct DiagnosticsReport {
    ObliquenessResult obliqueness;
    PinchingResult pinching;
    MeanCurvatureResult mean_curvature;
    double boundary_image_err = 0.0;
    std::optional<DualityResult> duality;
    std::optional<UniquenessResult> uniqueness;
    std::vector<StructureMargins> structure;
    double c = 0.0;
    double residual_interior = 0.0;
    double residual_boundary = 0.0;
    double residual_mean = 0.0;
    double min_hessian_eig = 0.0;
    bool converged = false;
    double eps_pos = 0.0;

    /// Obliqueness > 0, uniform convexity and residual convergence.
    [[nodiscard]] bool hard_pass() const;
};

/// Obliqueness, pinching, mean curvature and boundary image. Duality, uniqueness and
/// structure entries are filled by the caller when computed.
[[nodiscard]] DiagnosticsReport diagnose(const SolveState& state, const Problem& problem);

[[nodiscard]] nlohmann::json to_json(const DiagnosticsReport& report);
[[nodiscard]] nlohmann::json to_json(const StructureMargins& m);

/// Per-key differences fine - coarse for the scalar certificate entries.
[[nodiscard]] nlohmann::json refinement_delta(const DiagnosticsReport& fine, const DiagnosticsReport& coarse);

/// Radical-inverse Halton point in (0, 1) for the given prime base; index >= 1.
[[nodiscard]] double halton(std::uint64_t index, unsigned base);

}  // namespace lagmc
