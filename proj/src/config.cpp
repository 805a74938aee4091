#include "lagmc/config.hpp"

#include "lagmc/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace lagmc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_plain(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    const auto [p, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && p == last && std::isfinite(out);
}

template <typename Int>
Int parse_integer(const std::string& text, const std::string& what) {
    const std::string s = trim(text);
    Int v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
        throw ConfigError(what + ": expected an integer, got '" + s + "'");
    }
    return v;
}

Vec2 parse_vec2(const std::string& text, const std::string& what) {
    const std::vector<double> v = parse_real_list(text, what);
    if (v.size() != 2) throw ConfigError(what + ": expected two comma-separated values");
    return {v[0], v[1]};
}

const std::vector<std::string> kShapeKeys = {"shape",       "center", "radius", "semi_axes", "rotation",
                                             "base_radius", "cos",    "sin",    "boost"};

ConvexDomain build_domain(const std::map<std::string, std::string>& kv, const std::string& side, double default_radius,
                          double& boost) {
    const auto get = [&](const std::string& k) -> const std::string* {
        const auto it = kv.find(side + "." + k);
        return it == kv.end() ? nullptr : &it->second;
    };
    const std::string shape = get("shape") ? trim(*get("shape")) : std::string("disk");
    std::set<std::string> allowed = {"shape", "center", "boost"};
    if (shape == "disk") {
        allowed.insert("radius");
    } else if (shape == "ellipse") {
        allowed.insert({"semi_axes", "rotation"});
    } else if (shape == "fourier") {
        allowed.insert({"base_radius", "cos", "sin"});
    } else {
        throw ConfigError(side + ".shape: unknown shape '" + shape + "' (expected disk, ellipse or fourier)");
    }
    for (const std::string& k : kShapeKeys) {
        if (get(k) && !allowed.count(k)) {
            throw ConfigError("key '" + side + "." + k + "' does not apply to shape '" + shape + "'");
        }
    }
    const Vec2 center = get("center") ? parse_vec2(*get("center"), side + ".center") : Vec2::Zero();
    const auto build = [&] {
        if (shape == "disk") {
            const double r = get("radius") ? parse_real(*get("radius"), side + ".radius") : default_radius;
            return ConvexDomain::disk(center, r);
        }
        if (shape == "ellipse") {
            if (!get("semi_axes")) throw ConfigError("missing required key '" + side + ".semi_axes'");
            const Vec2 ax = parse_vec2(*get("semi_axes"), side + ".semi_axes");
            const double rot = get("rotation") ? parse_real(*get("rotation"), side + ".rotation") : 0.0;
            return ConvexDomain::ellipse(center, ax, rot);
        }
        if (!get("base_radius")) throw ConfigError("missing required key '" + side + ".base_radius'");
        const double r0 = parse_real(*get("base_radius"), side + ".base_radius");
        std::vector<double> cs = get("cos") ? parse_real_list(*get("cos"), side + ".cos", true) : std::vector<double>{};
        std::vector<double> sn = get("sin") ? parse_real_list(*get("sin"), side + ".sin", true) : std::vector<double>{};
        return ConvexDomain::smooth_convex(center, r0, std::move(cs), std::move(sn));
    };
    try {
        ConvexDomain d = build();
        // d - boost d^2 / 2 stays concave only while boost * depth < 1; 1/max_radius is the disk's exact value.
        boost = get("boost") ? parse_real(*get("boost"), side + ".boost") : 1.0 / d.max_radius();
        return d;
    } catch (const GeometryError& e) {
        throw ConfigError(side + ": " + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(side + ": " + e.what());
    }
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k = {"operator.tau",
                                      "f.kappa",
                                      "f.f0",
                                      "f.quadratic",
                                      "grid.n_rho",
                                      "grid.n_theta",
                                      "solver.residual_tol",
                                      "solver.step_tol",
                                      "solver.eps_pos",
                                      "solver.max_newton",
                                      "homotopy.initial_step",
                                      "homotopy.min_step",
                                      "homotopy.max_steps",
                                      "homotopy.fast_iterations",
                                      "run.out",
                                      "run.seed",
                                      "sweep.tau_list",
                                      "refine.levels",
                                      "dual.c_tol",
                                      "dual.roundtrip_factor"};
        for (const char* side : {"source", "target"}) {
            for (const std::string& s : kShapeKeys) k.push_back(std::string(side) + "." + s);
        }
        return k;
    }();
    return keys;
}

double parse_real(const std::string& text, const std::string& what) {
    std::string s = trim(text);
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    double v = 0.0;
    if (parse_plain(s, v)) return v;
    const auto pos = s.find("pi");
    if (pos != std::string::npos) {
        std::string pre = s.substr(0, pos);
        const std::string post = s.substr(pos + 2);
        if (!pre.empty() && pre.back() == '*') pre.pop_back();
        double factor = 1.0;
        bool ok = true;
        if (pre == "-") {
            factor = -1.0;
        } else if (!pre.empty()) {
            ok = parse_plain(pre, factor);
        }
        double divisor = 1.0;
        if (ok && !post.empty()) ok = post[0] == '/' && parse_plain(post.substr(1), divisor) && divisor != 0.0;
        if (ok) return factor * std::numbers::pi / divisor;
    }
    throw ConfigError(what + ": expected a real number or pi expression, got '" + trim(text) + "'");
}

std::vector<double> parse_real_list(const std::string& text, const std::string& what, bool allow_empty) {
    std::vector<double> out;
    const std::string t = trim(text);
    if (t.empty()) {
        if (allow_empty) return out;
        throw ConfigError(what + ": empty list");
    }
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_real(item, what));
    if (t.back() == ',') throw ConfigError(what + ": trailing comma");
    return out;
}

RunConfig parse_config(const std::string& text, const std::string& name) {
    const std::vector<std::string>& keys = config_keys();
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
        if (kv.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        kv[key] = value;
    }

    RunConfig cfg;
    cfg.entries = kv;
    ProblemSpec& s = cfg.spec;
    const auto has = [&](const char* k) { return kv.count(k) > 0; };

    if (!has("operator.tau")) throw ConfigError(name + ": missing required key 'operator.tau'");
    try {
        s.op = OperatorParams::from_tau(parse_real(kv["operator.tau"], "operator.tau"));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("operator.tau: ") + e.what());
    }

    s.source = build_domain(kv, "source", 1.0, s.source_boost);
    s.target = build_domain(kv, "target", 2.0, s.target_boost);

    if (has("f.kappa")) s.f.kappa = parse_vec2(kv["f.kappa"], "f.kappa");
    if (has("f.f0")) s.f.f0 = parse_real(kv["f.f0"], "f.f0");
    if (has("f.quadratic")) {
        const std::vector<double> q = parse_real_list(kv["f.quadratic"], "f.quadratic");
        if (q.size() != 3) throw ConfigError("f.quadratic: expected qxx, qxy, qyy");
        s.f.quadratic << q[0], q[1], q[1], q[2];
    }

    if (has("grid.n_rho")) s.n_rho = parse_integer<int>(kv["grid.n_rho"], "grid.n_rho");
    s.n_theta = has("grid.n_theta") ? parse_integer<int>(kv["grid.n_theta"], "grid.n_theta") : 2 * s.n_rho;
    if (s.n_rho < 8) throw ConfigError("grid.n_rho: must be at least 8");
    if (s.n_theta < 16 || s.n_theta % 2 != 0) throw ConfigError("grid.n_theta: must be even and at least 16");

    if (has("solver.residual_tol")) s.tol.residual_tol = parse_real(kv["solver.residual_tol"], "solver.residual_tol");
    if (has("solver.step_tol")) s.tol.step_tol = parse_real(kv["solver.step_tol"], "solver.step_tol");
    if (has("solver.eps_pos")) s.tol.eps_pos = parse_real(kv["solver.eps_pos"], "solver.eps_pos");
    if (has("solver.max_newton")) s.tol.max_newton = parse_integer<int>(kv["solver.max_newton"], "solver.max_newton");
    if (!(s.tol.residual_tol > 0.0)) throw ConfigError("solver.residual_tol: must be positive");
    if (s.tol.max_newton < 1) throw ConfigError("solver.max_newton: must be at least 1");

    HomotopyControls& h = s.homotopy;
    if (has("homotopy.initial_step")) h.initial_step = parse_real(kv["homotopy.initial_step"], "homotopy.initial_step");
    if (has("homotopy.min_step")) h.min_step = parse_real(kv["homotopy.min_step"], "homotopy.min_step");
    if (has("homotopy.max_steps")) h.max_steps = parse_integer<int>(kv["homotopy.max_steps"], "homotopy.max_steps");
    if (has("homotopy.fast_iterations")) {
        h.fast_iterations = parse_integer<int>(kv["homotopy.fast_iterations"], "homotopy.fast_iterations");
    }
    if (!(h.min_step > 0.0) || !(h.initial_step >= h.min_step) || h.initial_step > 1.0) {
        throw ConfigError("homotopy: need 0 < min_step <= initial_step <= 1");
    }

    if (has("run.out")) cfg.out_dir = kv["run.out"];
    if (has("run.seed")) cfg.seed = parse_integer<std::uint64_t>(kv["run.seed"], "run.seed");
    if (has("sweep.tau_list")) cfg.tau_list = parse_real_list(kv["sweep.tau_list"], "sweep.tau_list", true);
    if (has("refine.levels")) cfg.levels = parse_integer<int>(kv["refine.levels"], "refine.levels");
    if (has("dual.c_tol")) cfg.dual_c_tol = parse_real(kv["dual.c_tol"], "dual.c_tol");
    if (has("dual.roundtrip_factor")) {
        cfg.dual_roundtrip_factor = parse_real(kv["dual.roundtrip_factor"], "dual.roundtrip_factor");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace lagmc
