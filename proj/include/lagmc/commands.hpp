#pragma once

#include "lagmc/config.hpp"
#include "lagmc/operators.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace lagmc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCertificate = 1;
inline constexpr int kExitPath = 2;
inline constexpr int kExitConfig = 64;

struct Io {
    std::ostream& out;
    std::ostream& err;
};

/// Solve, write u.csv (+ sidecar), solve_log.json, report.json and manifest.json.
int cmd_solve(const RunConfig& cfg, const std::filesystem::path& out_dir, Io io);

/// Operator property suite and structure conditions for the configured tau; writes operator_report.json.
int cmd_verify_operator(const RunConfig& cfg, const std::filesystem::path& out_dir, Io io);

/// Primal and dual solves plus the duality certificates; writes both fields and dual_report.json.
int cmd_dual_check(const RunConfig& cfg, const std::filesystem::path& out_dir, Io io);

/// Independent solves per tau on up to `threads` workers; writes sweep.csv.
int cmd_sweep_tau(const RunConfig& cfg, std::vector<double> taus, const std::filesystem::path& out_dir, Io io,
                  unsigned threads);

/// Solves at `levels` doubling resolutions starting from the configured grid; writes refine.csv and refine.json.
int cmd_refine_study(const RunConfig& cfg, int levels, const std::filesystem::path& out_dir, Io io);

struct SuiteCase {
    std::string name;
    bool ok = false;
    nlohmann::json detail;
};

/// Identity, finite-difference, limit and structure checks for one tau. `seed` drives the random points.
[[nodiscard]] std::vector<SuiteCase> operator_suite(const OperatorParams& params, std::uint64_t seed);

/// Worker count for sweeps: LAGMC_THREADS when set and positive, else the hardware concurrency.
[[nodiscard]] unsigned sweep_threads();

/// Exact potential b.x + m/2 |x - x0|^2 when source and target are disks and f is constant.
/// Returns false when no closed form is available.
bool exact_solution(const ProblemSpec& spec, double& m, Vec2& b, Vec2& x0);

}  // namespace lagmc::cli
