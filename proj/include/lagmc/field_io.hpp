#pragma once

#include "lagmc/grid.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <string>

namespace lagmc {

/// Grid metadata written next to every field dump.
[[nodiscard]] nlohmann::json grid_metadata(const MappedGrid& grid);

/// CSV with header rho_index,theta_index,x,y,value; doubles in %.17g so they round-trip exactly.
void write_field_csv(const std::string& path, const MappedGrid& grid, const Eigen::VectorXd& values);
/// Writes `<csv path>.json` holding grid_metadata plus the field name.
void write_field_sidecar(const std::string& csv_path, const MappedGrid& grid, const std::string& field_name);

/// Reads a dump produced by write_field_csv against a matching grid.
/// Throws std::runtime_error on malformed rows, unknown indices or duplicates.
[[nodiscard]] Eigen::VectorXd read_field_csv(const std::string& path, const MappedGrid& grid);

/// %.17g formatting.
[[nodiscard]] std::string format_double(double v);

}  // namespace lagmc
