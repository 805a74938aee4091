#pragma once

#include "lagmc/solver.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lagmc {

/// Parsed run configuration.
///
/// The file format is one `dotted.key = value` per line; `#` starts a comment.
/// Reals accept pi expressions such as `pi/8`, `3*pi/8` or `0.5pi`; vectors are comma separated.
struct RunConfig {
    ProblemSpec spec;
    std::optional<std::string> out_dir;  ///< run.out
    std::uint64_t seed = 1;              ///< run.seed
    std::vector<double> tau_list;        ///< sweep.tau_list
    int levels = 3;                      ///< refine.levels
    double dual_c_tol = 1e-6;            ///< dual.c_tol
    double dual_roundtrip_factor = 5.0;  ///< dual.roundtrip_factor, times h^2
    std::map<std::string, std::string> entries;  ///< normalized key -> raw value, as read
};

/// Throws ConfigError naming the line and key on any problem, including unknown keys.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::string& name = "config");
[[nodiscard]] RunConfig load_config(const std::string& path);

/// Every accepted key.
[[nodiscard]] const std::vector<std::string>& config_keys();

/// Real number or pi expression; throws ConfigError with `what` in the message.
[[nodiscard]] double parse_real(const std::string& text, const std::string& what);
/// Comma-separated reals (possibly empty when allow_empty).
[[nodiscard]] std::vector<double> parse_real_list(const std::string& text, const std::string& what,
                                                  bool allow_empty = false);

}  // namespace lagmc
