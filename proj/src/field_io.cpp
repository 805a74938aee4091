#include "lagmc/field_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace lagmc {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json grid_metadata(const MappedGrid& grid) {
    const ConvexDomain& d = grid.domain();
    nlohmann::json j;
    j["n_rho"] = grid.n_rho();
    j["n_theta"] = grid.n_theta();
    j["node_count"] = grid.size();
    j["domain"] = d.describe();
    j["origin"] = {d.origin().x(), d.origin().y()};
    j["area"] = d.area();
    j["spacing"] = grid.spacing();
    j["layout"] = "pole node first (rho_index 0), then rings rho_index 1..n_rho-1, theta_index 0..n_theta-1";
    return j;
}

void write_field_csv(const std::string& path, const MappedGrid& grid, const Eigen::VectorXd& values) {
    if (values.size() != grid.size()) throw std::invalid_argument("write_field_csv: size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "rho_index,theta_index,x,y,value\n";
    for (int k = 0; k < grid.size(); ++k) {
        const Vec2& p = grid.node(k);
        out << grid.ring_of(k) << ',' << grid.column_of(k) << ',' << format_double(p.x()) << ','
            << format_double(p.y()) << ',' << format_double(values[k]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

void write_field_sidecar(const std::string& csv_path, const MappedGrid& grid, const std::string& field_name) {
    nlohmann::json j = grid_metadata(grid);
    j["field"] = field_name;
    j["csv"] = csv_path;
    std::ofstream out(csv_path + ".json");
    if (!out) throw std::runtime_error("cannot open " + csv_path + ".json for writing");
    out << j.dump(2) << '\n';
}

Eigen::VectorXd read_field_csv(const std::string& path, const MappedGrid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "rho_index,theta_index,x,y,value") {
        throw std::runtime_error(path + ": unexpected header");
    }
    Eigen::VectorXd v(grid.size());
    std::vector<bool> seen(grid.size(), false);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell[5];
        for (int c = 0; c < 5; ++c) {
            if (!std::getline(row, cell[c], ',')) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 columns");
            }
        }
        int i = 0, j = 0;
        double value = 0.0;
        try {
            i = std::stoi(cell[0]);
            j = std::stoi(cell[1]);
            value = std::stod(cell[4]);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed number");
        }
        if (i < 0 || i >= grid.n_rho() || j < 0 || j >= grid.n_theta() || (i == 0 && j != 0)) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": index outside the grid");
        }
        const int k = grid.index(i, j);
        if (seen[k]) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate node");
        seen[k] = true;
        v[k] = value;
    }
    for (int k = 0; k < grid.size(); ++k) {
        if (!seen[k]) throw std::runtime_error(path + ": missing node " + std::to_string(k));
    }
    return v;
}

}  // namespace lagmc
