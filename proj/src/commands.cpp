#include "lagmc/commands.hpp"

#include "lagmc/diagnostics.hpp"
#include "lagmc/eig.hpp"
#include "lagmc/errors.hpp"
#include "lagmc/field_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

namespace lagmc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::pair<std::string, std::string>>& files) {
    json j;
    j["command"] = command;
    json arr = json::array();
    for (const auto& [name, schema] : files) arr.push_back({{"path", name}, {"schema", schema}});
    j["files"] = arr;
    write_json(dir / "manifest.json", j);
}

std::string fmt(double v, const char* f = "%.12g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

json domain_json(const ConvexDomain& d) {
    return {{"description", d.describe()},
            {"area", d.area()},
            {"barycenter", {d.barycenter().x(), d.barycenter().y()}},
            {"curvature_min", d.curvature_min()}};
}

json spec_json(const ProblemSpec& s) {
    json j;
    j["tau"] = s.op.tau();
    j["branch"] = std::string(branch_name(s.op.branch()));
    j["source"] = domain_json(s.source);
    j["target"] = domain_json(s.target);
    j["source_boost"] = s.source_boost;
    j["target_boost"] = s.target_boost;
    j["f"] = {{"f0", s.f.f0},
              {"kappa", {s.f.kappa.x(), s.f.kappa.y()}},
              {"quadratic", {s.f.quadratic(0, 0), s.f.quadratic(0, 1), s.f.quadratic(1, 1)}}};
    j["kappa_norm"] = s.f.kappa.norm();
    j["grid"] = {{"n_rho", s.n_rho}, {"n_theta", s.n_theta}};
    j["tolerances"] = {{"residual_tol", s.tol.residual_tol},
                       {"step_tol", s.tol.step_tol},
                       {"eps_pos", s.tol.eps_pos},
                       {"max_newton", s.tol.max_newton}};
    j["homotopy"] = {{"initial_step", s.homotopy.initial_step},
                     {"min_step", s.homotopy.min_step},
                     {"max_steps", s.homotopy.max_steps},
                     {"fast_iterations", s.homotopy.fast_iterations}};
    return j;
}

json path_json(const SolveState& s) {
    json arr = json::array();
    for (const PathRecord& r : s.path) {
        arr.push_back({{"t", r.t},
                       {"c", r.c},
                       {"step", r.step},
                       {"residual_interior", r.residual_interior},
                       {"residual_boundary", r.residual_boundary},
                       {"residual_mean", r.residual_mean},
                       {"newton_iters", r.newton_iters},
                       {"min_hessian_eig", r.min_hessian_eig}});
    }
    return arr;
}

json state_json(const SolveState& s) {
    return {{"c", s.c},
            {"t", s.t},
            {"converged", s.converged},
            {"valid", s.valid},
            {"residual_interior", s.residual_interior},
            {"residual_boundary", s.residual_boundary},
            {"residual_mean", s.residual_mean},
            {"newton_iters", s.newton_iters},
            {"min_hessian_eig", s.min_hessian_eig},
            {"worst_node", s.worst_node}};
}

// Result of a guarded solve: exit code != 0 means the caller should stop.
struct Guarded {
    int code = kExitOk;
    std::string message;
    double last_good_t = -1.0;
};

template <typename F>
Guarded guarded(F&& fn) {
    Guarded g;
    try {
        fn();
    } catch (const AdmissibilityError& e) {
        g.code = kExitConfig;
        g.message = std::string("right-hand side rejected: ") + e.what();
    } catch (const ContinuityFailure& e) {
        g.code = kExitPath;
        g.last_good_t = e.last_good_t();
        g.message = std::string("continuity path failure: ") + e.what();
    } catch (const ConvexityBreakdown& e) {
        g.code = kExitPath;
        g.message = std::string("convexity breakdown: ") + e.what();
    } catch (const NewtonFailure& e) {
        g.code = kExitPath;
        g.message = e.what();
    } catch (const GeometryError& e) {
        g.code = kExitConfig;
        g.message = std::string("geometry: ") + e.what();
    } catch (const ConfigError& e) {
        g.code = kExitConfig;
        g.message = e.what();
    }
    return g;
}

int report_failure(const Guarded& g, Io io) {
    io.err << "error: " << g.message << "\n";
    if (g.code == kExitPath && g.message.find("last good t") == std::string::npos) {
        io.err << "last good t = " << g.last_good_t << "\n";
    }
    return g.code;
}

std::optional<ProblemSpec> coarser(const ProblemSpec& s) {
    const int n_rho = (s.n_rho + 1) / 2;
    const int n_theta = s.n_theta / 4 * 2;
    if (n_rho < 8 || n_theta < 16) return std::nullopt;
    ProblemSpec c = s;
    c.n_rho = n_rho;
    c.n_theta = n_theta;
    return c;
}

void write_field(const fs::path& dir, const std::string& name, const SolveState& s, const std::string& field) {
    const fs::path csv = dir / name;
    write_field_csv(csv.string(), *s.grid, s.u);
    write_field_sidecar(csv.string(), *s.grid, field);
}

double order(double coarse, double fine) {
    if (!(coarse > 0.0) || !(fine > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::log2(coarse / fine);
}

json maybe_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

bool exact_solution(const ProblemSpec& spec, double& m, Vec2& b, Vec2& x0) {
    if (spec.source.kind() != ShapeKind::Disk || spec.target.kind() != ShapeKind::Disk || !spec.f.is_constant()) {
        return false;
    }
    m = spec.target.radius(0.0) / spec.source.radius(0.0);
    b = spec.target.barycenter();
    x0 = spec.source.barycenter();
    return true;
}

unsigned sweep_threads() {
    if (const char* env = std::getenv("LAGMC_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---- solve -------------------------------------------------------------------

int cmd_solve(const RunConfig& cfg, const fs::path& out_dir, Io io) {
    const ProblemSpec& spec = cfg.spec;
    std::optional<Problem> problem;
    SolveState state;
    const Guarded g = guarded([&] {
        problem.emplace(Problem::primal(spec));
        state = continuity_solve(*problem);
    });
    if (g.code != kExitOk) return report_failure(g, io);

    const DiagnosticsReport report = diagnose(state, *problem);
    json refinement;
    if (const auto cs = coarser(spec)) {
        std::optional<Problem> cp;
        SolveState coarse;
        const Guarded cg = guarded([&] {
            cp.emplace(Problem::primal(*cs));
            coarse = continuity_solve(*cp);
        });
        if (cg.code == kExitOk) {
            refinement = refinement_delta(report, diagnose(coarse, *cp));
            refinement["coarse_grid"] = {{"n_rho", cs->n_rho}, {"n_theta", cs->n_theta}};
        } else {
            refinement = {{"error", cg.message}};
        }
    } else {
        refinement = {{"error", "grid too small to halve"}};
    }

    fs::create_directories(out_dir);
    write_field(out_dir, "u.csv", state, "u");
    json log;
    log["command"] = "solve";
    log["config"] = cfg.entries;
    log["spec"] = spec_json(spec);
    log["theta0"] = problem->theta0;
    log["target_defining_theta"] = problem->image_h.theta();
    log["c_bound"] = c_bound(*problem, state.t);
    log["path"] = path_json(state);
    log["final"] = state_json(state);
    write_json(out_dir / "solve_log.json", log);
    json rep;
    rep["diagnostics"] = to_json(report);
    rep["refinement"] = refinement;
    write_json(out_dir / "report.json", rep);
    write_manifest(out_dir, "solve",
                   {{"u.csv", "field_csv"}, {"u.csv.json", "field_sidecar"}, {"solve_log.json", "solve_log"},
                    {"report.json", "diagnostics_report"}});

    io.out << "c = " << fmt(state.c, "%.15g") << "\n";
    io.out << "residuals: interior " << fmt(state.residual_interior, "%.3e") << ", boundary "
           << fmt(state.residual_boundary, "%.3e") << ", mean " << fmt(state.residual_mean, "%.3e") << "\n";
    io.out << "newton iterations " << state.newton_iters << " over " << state.path.size() << " stages\n";
    io.out << "obliqueness_min " << fmt(report.obliqueness.min, "%.6f") << ", mass_err "
           << fmt(report.pinching.mass_err, "%.3e") << ", boundary_image_err " << fmt(report.boundary_image_err, "%.3e")
           << "\n";
    if (!report.hard_pass()) {
        io.err << "certificate failure: converged=" << state.converged << " obliqueness_min=" << report.obliqueness.min
               << " min_hessian_eig=" << state.min_hessian_eig << "\n";
        return kExitCertificate;
    }
    return kExitOk;
}

// ---- verify-operator -------------------------------------------------------------

std::vector<SuiteCase> operator_suite(const OperatorParams& p, std::uint64_t seed) {
    std::vector<SuiteCase> cases;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logu(std::log(0.05), std::log(20.0));
    const auto point = [&] { return std::vector<double>{std::exp(logu(rng)), std::exp(logu(rng))}; };
    constexpr int kPoints = 1000;

    {
        const Limits l = limits(p, 2);
        cases.push_back({"limits_ordering", l.at_zero < l.at_infinity, {{"at_zero", l.at_zero}, {"at_infinity", l.at_infinity}}});
    }
    {
        double grad_err = 0.0, hess_err = 0.0, dual_err = 0.0, dual_grad_err = 0.0, sym_err = 0.0;
        double mono = std::numeric_limits<double>::infinity();
        double conc = -std::numeric_limits<double>::infinity();
        double dconc = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < kPoints; ++k) {
            const std::vector<double> lam = point();
            const std::vector<double> g = grad_F(p, lam);
            const std::vector<double> h = hess_F_diag(p, lam);
            for (int i = 0; i < 2; ++i) {
                const double step = 1e-6 * std::max(1.0, lam[i]);
                std::vector<double> up = lam, dn = lam;
                up[i] += step;
                dn[i] -= step;
                const double fd = (eval_F(p, up) - eval_F(p, dn)) / (2 * step);
                grad_err = std::max(grad_err, std::abs(fd - g[i]) / std::abs(g[i]));
                const double fdh = (grad_F(p, up)[i] - grad_F(p, dn)[i]) / (2 * step);
                hess_err = std::max(hess_err, std::abs(fdh - h[i]) / std::max(std::abs(h[i]), 1e-8));
                mono = std::min(mono, g[i]);
                conc = std::max(conc, h[i]);
            }
            const std::vector<double> mu = {1.0 / lam[0], 1.0 / lam[1]};
            const double fv = eval_F(p, lam);
            dual_err = std::max(dual_err, std::abs(dual_eval(p, mu) + fv) / std::max(1.0, std::abs(fv)));
            const std::vector<double> dg = dual_grad(p, mu);
            for (int i = 0; i < 2; ++i) {
                dual_grad_err = std::max(dual_grad_err, std::abs(dg[i] - lam[i] * lam[i] * g[i]) / std::abs(dg[i]));
            }
            for (double d : dual_hess_diag(p, mu)) dconc = std::max(dconc, d);
            const std::vector<double> swapped = {lam[1], lam[0]};
            sym_err = std::max(sym_err, std::abs(eval_F(p, swapped) - fv));
        }
        cases.push_back({"grad_finite_difference", grad_err <= 1e-6, {{"max_rel_err", grad_err}, {"tol", 1e-6}}});
        cases.push_back({"hess_finite_difference", hess_err <= 1e-5, {{"max_rel_err", hess_err}, {"tol", 1e-5}}});
        cases.push_back({"monotonicity", mono > 0.0, {{"min_dF", mono}}});
        cases.push_back({"concavity", conc <= 0.0, {{"max_d2F", conc}}});
        cases.push_back({"dual_concavity", dconc <= 0.0, {{"max_d2Ftilde", dconc}}});
        cases.push_back({"dual_identity", dual_err <= 1e-12, {{"max_err", dual_err}, {"tol", 1e-12}}});
        cases.push_back({"dual_gradient_identity", dual_grad_err <= 1e-12, {{"max_rel_err", dual_grad_err}}});
        cases.push_back({"symmetry", sym_err <= 1e-14, {{"max_err", sym_err}}});
    }
    {
        std::uniform_real_distribution<double> ang(0.0, 2 * kPi);
        double rot_err = 0.0, dir_err = 0.0;
        for (int k = 0; k < 100; ++k) {
            const std::vector<double> lam = point();
            const double th = ang(rng);
            Eigen::Matrix2d q;
            q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
            const Eigen::MatrixXd a = q * Eigen::Vector2d(lam[0], lam[1]).asDiagonal() * q.transpose();
            const double fv = eval_F(p, lam);
            rot_err = std::max(rot_err, std::abs(eval_F_matrix(p, a) - fv) / std::max(1.0, std::abs(fv)));
            Eigen::MatrixXd e(2, 2);
            e << ang(rng) - kPi, 0.3, 0.3, ang(rng) - kPi;
            const double eps = 1e-6 * std::min(lam[0], lam[1]);
            const double fd = (eval_F_matrix(p, a + eps * e) - eval_F_matrix(p, a - eps * e)) / (2 * eps);
            const double an = dF_matrix(p, a).cwiseProduct(e).sum();
            dir_err = std::max(dir_err, std::abs(fd - an) / std::max(std::abs(an), 1e-8));
        }
        cases.push_back({"matrix_rotation_invariance", rot_err <= 1e-12, {{"max_err", rot_err}}});
        cases.push_back({"matrix_directional_derivative", dir_err <= 1e-6, {{"max_rel_err", dir_err}}});
    }
    {
        // Seam continuity near pi/4 on [0.1, 10]^2. Approaching pi/2 the normalized quotient form tends to
        // arctan(lam) - pi/2, so there the family is continuous only up to the constant n pi/2.
        double seam = 0.0;
        const OperatorParams mid = OperatorParams::from_tau(kPi / 4);
        const OperatorParams lo = OperatorParams::from_tau(kPi / 4 - 1e-6);
        const OperatorParams hi = OperatorParams::from_tau(kPi / 4 + 1e-6);
        const OperatorParams right = OperatorParams::from_tau(kPi / 2);
        const OperatorParams near_right = OperatorParams::from_tau(kPi / 2 - 1e-6);
        double seam_right = 0.0;
        for (int i = 0; i <= 20; ++i) {
            for (int j = 0; j <= 20; ++j) {
                const std::vector<double> lam = {0.1 * std::pow(100.0, i / 20.0), 0.1 * std::pow(100.0, j / 20.0)};
                const double f = eval_F(mid, lam);
                seam = std::max({seam, std::abs(eval_F(lo, lam) - f), std::abs(eval_F(hi, lam) - f)});
                seam_right = std::max(seam_right, std::abs(eval_F(near_right, lam) + kPi - eval_F(right, lam)));
            }
        }
        cases.push_back({"seam_continuity_pi_4", seam <= 1e-4, {{"max_diff", seam}, {"tol", 1e-4}}});
        cases.push_back({"seam_continuity_pi_2_up_to_constant", seam_right <= 1e-4, {{"max_diff", seam_right}, {"tol", 1e-4}}});
    }
    {
        const StructureBounds r = range_bounds(OperatorParams::from_tau(kPi / 2), 2, 1.0, 1.0);
        const bool ok = std::abs(r.grad_sum.lo - 0.5) <= 1e-12 && std::abs(r.grad_sum.hi - 2.0) <= 1e-12 &&
                        std::abs(r.weighted_sum.lo - 0.5) <= 1e-12 && std::abs(r.weighted_sum.hi - 2.0) <= 1e-12;
        cases.push_back({"range_bounds_tau_pi_2_s1_1_s2_1", ok,
                         {{"grad_sum", {r.grad_sum.lo, r.grad_sum.hi}}, {"weighted_sum", {r.weighted_sum.lo, r.weighted_sum.hi}}}});
        const StructureBounds q = range_bounds(OperatorParams::from_tau(kPi / 4), 2, 1e-12, 1e12);
        const bool okq = std::abs(q.grad_sum.lo - std::sqrt(2.0)) <= 1e-9 && std::abs(q.grad_sum.hi - 2 * std::sqrt(2.0)) <= 1e-9;
        cases.push_back({"range_bounds_tau_pi_4_full_cone", okq, {{"grad_sum", {q.grad_sum.lo, q.grad_sum.hi}}}});
    }
    {
        const Limits a = limits(OperatorParams::from_tau(kPi / 2), 2);
        cases.push_back({"limits_tau_pi_2", std::abs(a.at_zero) <= 1e-15 && std::abs(a.at_infinity - kPi) <= 1e-12,
                         {{"at_zero", a.at_zero}, {"at_infinity", a.at_infinity}}});
        const Limits b = limits(OperatorParams::from_tau(kPi / 4), 2);
        cases.push_back({"limits_tau_pi_4",
                         std::abs(b.at_zero + 2 * std::sqrt(2.0)) <= 1e-12 && std::abs(b.at_infinity) <= 1e-12,
                         {{"at_zero", b.at_zero}, {"at_infinity", b.at_infinity}}});
        // Textbook closed forms differ from this normalization by 2 * branch_offset.
        const long double tau = 3 * std::numbers::pi_v<long double> / 8;
        const long double ca = std::cos(tau) / std::sin(tau);
        const long double cb = std::sqrt(1.0L - ca * ca);
        const long double cs = std::sqrt(ca * ca + 1.0L);
        const OperatorParams p38 = OperatorParams::from_tau(static_cast<double>(tau));
        const Limits c = limits(p38, 2);
        const double off = 2 * branch_offset(p38);
        const double z = static_cast<double>(2 * cs / cb * std::atan((ca - cb) / (ca + cb)));
        const double inf = static_cast<double>(2 * std::numbers::pi_v<long double> * cs / (4 * cb));
        cases.push_back({"limits_tau_3pi_8",
                         std::abs(c.at_zero + off - z) <= 1e-12 * std::abs(z) && std::abs(c.at_infinity + off - inf) <= 1e-12 * inf,
                         {{"at_zero", c.at_zero}, {"at_infinity", c.at_infinity}, {"textbook_offset", off}}});
    }
    return cases;
}

int cmd_verify_operator(const RunConfig& cfg, const fs::path& out_dir, Io io) {
    const OperatorParams& p = cfg.spec.op;
    const std::vector<SuiteCase> cases = operator_suite(p, cfg.seed);
    bool all = true;
    json arr = json::array();
    for (const SuiteCase& c : cases) {
        all = all && c.ok;
        arr.push_back({{"name", c.name}, {"ok", c.ok}, {"detail", c.detail}});
        io.out << (c.ok ? "ok   " : "FAIL ") << c.name;
        if (!c.ok) io.out << " " << c.detail.dump();
        io.out << "\n";
    }
    json structure = json::array();
    for (auto [s1, s2] : {std::pair{1.0, 1.0}, std::pair{0.5, 2.0}}) {
        const StructureMargins m = verify_structure_conditions(p, s1, s2, 10000);
        all = all && m.ok;
        structure.push_back(to_json(m));
        io.out << (m.ok ? "ok   " : "FAIL ") << "structure s1=" << s1 << " s2=" << s2 << ": sum dF in ["
               << fmt(m.bounds.grad_sum.lo, "%.6g") << ", " << fmt(m.bounds.grad_sum.hi, "%.6g") << "], sum dF lam^2 in ["
               << fmt(m.bounds.weighted_sum.lo, "%.6g") << ", " << fmt(m.bounds.weighted_sum.hi, "%.6g") << "], Lambda1 "
               << fmt(m.bounds.lambda1, "%.6g") << ", Lambda2 " << fmt(m.bounds.lambda2, "%.6g") << "\n";
    }
    fs::create_directories(out_dir);
    json rep;
    rep["tau"] = p.tau();
    rep["branch"] = std::string(branch_name(p.branch()));
    rep["seed"] = cfg.seed;
    rep["cases"] = arr;
    rep["structure_margins"] = structure;
    rep["ok"] = all;
    write_json(out_dir / "operator_report.json", rep);
    write_manifest(out_dir, "verify-operator", {{"operator_report.json", "operator_report"}});
    return all ? kExitOk : kExitCertificate;
}

// ---- dual-check ----------------------------------------------------------------

int cmd_dual_check(const RunConfig& cfg, const fs::path& out_dir, Io io) {
    const ProblemSpec& spec = cfg.spec;
    std::optional<Problem> primal_problem;
    std::optional<Problem> dual_problem;
    SolveState primal;
    SolveState dual;
    const Guarded g = guarded([&] {
        primal_problem.emplace(Problem::primal(spec));
        primal = continuity_solve(*primal_problem);
        dual_problem.emplace(Problem::dual(spec));
        dual = solve_dual(spec, primal);
    });
    if (g.code != kExitOk) return report_failure(g, io);

    DiagnosticsReport report = diagnose(primal, *primal_problem);
    report.duality = check_duality(primal, dual, *primal_problem, *dual_problem, cfg.seed);
    const DiagnosticsReport dual_report = diagnose(dual, *dual_problem);
    const DualityResult& d = *report.duality;
    const double h = primal.grid->spacing();
    const double roundtrip_tol = cfg.dual_roundtrip_factor * h * h;

    fs::create_directories(out_dir);
    write_field(out_dir, "u.csv", primal, "u");
    write_field(out_dir, "dual_u.csv", dual, "dual_u");
    json rep;
    rep["c_primal"] = primal.c;
    rep["c_dual"] = dual.c;
    rep["c_dual_err"] = d.c_dual_err;
    rep["c_tol"] = cfg.dual_c_tol;
    rep["duality_roundtrip_err"] = d.roundtrip_err;
    rep["roundtrip_tol"] = roundtrip_tol;
    rep["h"] = h;
    rep["reciprocity_err"] = d.reciprocity_err;
    rep["reciprocity_samples"] = d.reciprocity_samples;
    rep["max_outside"] = d.max_outside;
    rep["outside_flagged"] = d.outside_flagged;
    rep["obliqueness_symmetry_err"] = d.obliqueness_symmetry_err;
    rep["primal"] = to_json(report);
    rep["dual"] = to_json(dual_report);
    rep["primal_path"] = path_json(primal);
    rep["dual_path"] = path_json(dual);
    write_json(out_dir / "dual_report.json", rep);
    write_manifest(out_dir, "dual-check",
                   {{"u.csv", "field_csv"}, {"u.csv.json", "field_sidecar"}, {"dual_u.csv", "field_csv"},
                    {"dual_u.csv.json", "field_sidecar"}, {"dual_report.json", "dual_report"}});

    io.out << "c primal = " << fmt(primal.c, "%.15g") << "\n";
    io.out << "c dual   = " << fmt(dual.c, "%.15g") << "\n";
    io.out << "c_dual_err " << fmt(d.c_dual_err, "%.3e") << " (tol " << fmt(cfg.dual_c_tol, "%.1e") << ")\n";
    io.out << "roundtrip_err " << fmt(d.roundtrip_err, "%.3e") << " (tol " << fmt(roundtrip_tol, "%.3e") << ")\n";
    io.out << "reciprocity_err " << fmt(d.reciprocity_err, "%.3e") << ", obliqueness symmetry "
           << fmt(d.obliqueness_symmetry_err, "%.3e") << "\n";
    const bool ok = report.hard_pass() && dual_report.hard_pass() && d.c_dual_err <= cfg.dual_c_tol &&
                    d.roundtrip_err <= roundtrip_tol && d.outside_flagged == 0;
    if (!ok) {
        io.err << "duality certificate failed\n";
        return kExitCertificate;
    }
    return kExitOk;
}

// ---- sweep-tau -----------------------------------------------------------------

int cmd_sweep_tau(const RunConfig& cfg, std::vector<double> taus, const fs::path& out_dir, Io io, unsigned threads) {
    if (taus.empty()) {
        io.err << "error: empty tau list\n";
        return kExitConfig;
    }
    std::vector<double> unique;
    for (double t : taus) {
        const bool dup = std::any_of(unique.begin(), unique.end(), [&](double u) { return std::abs(u - t) <= 1e-12; });
        if (dup) {
            io.err << "warning: duplicate tau " << fmt(t, "%.17g") << " ignored\n";
        } else {
            unique.push_back(t);
        }
    }
    for (double t : unique) {
        try {
            (void)OperatorParams::from_tau(t);
        } catch (const DomainError& e) {
            io.err << "error: tau " << t << ": " << e.what() << "\n";
            return kExitConfig;
        }
    }

    struct Row {
        double tau = 0.0;
        int code = kExitOk;
        std::string status;
        double c = 0.0, obliqueness = 0.0, mass = 0.0, mc = 0.0;
        bool hard = false;
    };
    std::vector<Row> rows(unique.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < unique.size(); i = next++) {
            Row& r = rows[i];
            r.tau = unique[i];
            ProblemSpec spec = cfg.spec;
            spec.op = OperatorParams::from_tau(unique[i]);
            std::optional<Problem> p;
            SolveState s;
            const Guarded g = guarded([&] {
                p.emplace(Problem::primal(spec));
                s = continuity_solve(*p);
            });
            r.code = g.code;
            if (g.code != kExitOk) {
                r.status = g.message;
                continue;
            }
            const DiagnosticsReport d = diagnose(s, *p);
            r.c = s.c;
            r.obliqueness = d.obliqueness.min;
            r.mass = d.pinching.mass_err;
            r.mc = d.mean_curvature.err;
            r.hard = d.hard_pass();
            r.status = r.hard ? "ok" : "certificate_failure";
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(unique.size())));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    fs::create_directories(out_dir);
    std::ofstream csv(out_dir / "sweep.csv");
    csv << "tau,c,obliqueness_min,mass_err,mean_curvature_err,status\n";
    int code = kExitOk;
    for (const Row& r : rows) {
        std::string status = r.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        csv << format_double(r.tau) << "," << format_double(r.c) << "," << format_double(r.obliqueness) << ","
            << format_double(r.mass) << "," << format_double(r.mc) << "," << status << "\n";
        io.out << "tau " << fmt(r.tau, "%.10f") << "  " << (r.code == kExitOk ? "c = " + fmt(r.c) : status) << "\n";
        if (r.code != kExitOk) {
            code = std::max(code, r.code == kExitPath ? kExitPath : r.code);
        } else if (!r.hard && code == kExitOk) {
            code = kExitCertificate;
        }
    }
    csv.close();
    write_manifest(out_dir, "sweep-tau", {{"sweep.csv", "sweep_csv"}});
    return code;
}

// ---- refine-study ----------------------------------------------------------------

int cmd_refine_study(const RunConfig& cfg, int levels, const fs::path& out_dir, Io io) {
    if (levels < 3) {
        io.err << "error: need ≥ 3 levels (got " << levels << ")\n";
        return kExitConfig;
    }
    double m = 0.0;
    Vec2 b, x0;
    const bool exact = exact_solution(cfg.spec, m, b, x0);

    struct Level {
        ProblemSpec spec;
        std::optional<Problem> problem;
        SolveState state;
        double u_err = 0.0, mass = 0.0, mc = 0.0;
    };
    std::vector<Level> lv(levels);
    for (int k = 0; k < levels; ++k) {
        Level& L = lv[k];
        L.spec = cfg.spec;
        L.spec.n_rho = (cfg.spec.n_rho - 1) * (1 << k) + 1;
        L.spec.n_theta = cfg.spec.n_theta * (1 << k);
        const Guarded g = guarded([&] {
            L.problem.emplace(Problem::primal(L.spec));
            L.state = continuity_solve(*L.problem);
        });
        if (g.code != kExitOk) {
            io.err << "level " << k << " (" << L.spec.n_rho << "x" << L.spec.n_theta << "): ";
            return report_failure(g, io);
        }
        const DiagnosticsReport d = diagnose(L.state, *L.problem);
        L.mass = d.pinching.mass_err;
        L.mc = d.mean_curvature.err;
        if (exact) {
            // Continuous mean of b.x + m/2 |x - x0|^2 over the source disk centred at x0.
            const double r = cfg.spec.source.radius(0.0);
            const double mean = b.dot(x0) + 0.25 * m * r * r;
            const MappedGrid& grid = *L.state.grid;
            for (int i = 0; i < grid.size(); ++i) {
                const Vec2& x = grid.node(i);
                const double ue = b.dot(x) + 0.5 * m * (x - x0).squaredNorm() - mean;
                L.u_err = std::max(L.u_err, std::abs(L.state.u[i] - ue));
            }
        }
    }
    if (!exact) {
        // Coarse nodes are a subset of the finest grid: ring i -> i 2^s, column j -> j 2^s.
        const Level& fine = lv.back();
        const MappedGrid& fg = *fine.state.grid;
        for (int k = 0; k + 1 < levels; ++k) {
            const MappedGrid& g = *lv[k].state.grid;
            const int scale = 1 << (levels - 1 - k);
            for (int i = 0; i < g.size(); ++i) {
                const int fi = fg.index(g.ring_of(i) * scale, g.column_of(i) * scale);
                lv[k].u_err = std::max(lv[k].u_err, std::abs(lv[k].state.u[i] - fine.state.u[fi]));
            }
        }
    }

    fs::create_directories(out_dir);
    std::ofstream csv(out_dir / "refine.csv");
    csv << "level,n_rho,n_theta,h,u_err,u_order,mass_err,mass_order,mean_curvature_err,mean_curvature_order,c\n";
    json arr = json::array();
    io.out << "reference: " << (exact ? "exact solution" : "finest level") << "\n";
    const int compared = exact ? levels : levels - 1;
    for (int k = 0; k < levels; ++k) {
        const Level& L = lv[k];
        const double uo = (k > 0 && k < compared) ? order(lv[k - 1].u_err, L.u_err) : std::nan("");
        const double mo = k > 0 ? order(lv[k - 1].mass, L.mass) : std::nan("");
        const double co = k > 0 ? order(lv[k - 1].mc, L.mc) : std::nan("");
        const bool has_err = k < compared;
        const double h = L.state.grid->spacing();
        csv << k << "," << L.spec.n_rho << "," << L.spec.n_theta << "," << format_double(h) << ","
            << (has_err ? format_double(L.u_err) : "") << "," << (std::isfinite(uo) ? format_double(uo) : "") << ","
            << format_double(L.mass) << "," << (std::isfinite(mo) ? format_double(mo) : "") << "," << format_double(L.mc)
            << "," << (std::isfinite(co) ? format_double(co) : "") << "," << format_double(L.state.c) << "\n";
        arr.push_back({{"level", k},
                       {"n_rho", L.spec.n_rho},
                       {"n_theta", L.spec.n_theta},
                       {"h", h},
                       {"u_err", has_err ? json(L.u_err) : json(nullptr)},
                       {"u_order", maybe_number(uo)},
                       {"mass_err", L.mass},
                       {"mass_order", maybe_number(mo)},
                       {"mean_curvature_err", L.mc},
                       {"mean_curvature_order", maybe_number(co)},
                       {"c", L.state.c}});
        io.out << "level " << k << " " << L.spec.n_rho << "x" << L.spec.n_theta << "  u_err "
               << (has_err ? fmt(L.u_err, "%.3e") : std::string("-")) << "  order "
               << (std::isfinite(uo) ? fmt(uo, "%.3f") : std::string("-")) << "  mass_err " << fmt(L.mass, "%.3e")
               << "  mean_curvature_err " << fmt(L.mc, "%.3e") << "\n";
    }
    csv.close();
    json rep;
    rep["reference"] = exact ? "exact" : "finest";
    rep["levels"] = arr;
    rep["spec"] = spec_json(cfg.spec);
    write_json(out_dir / "refine.json", rep);
    write_manifest(out_dir, "refine-study", {{"refine.csv", "refine_csv"}, {"refine.json", "refine_report"}});
    return kExitOk;
}

}  // namespace lagmc::cli
