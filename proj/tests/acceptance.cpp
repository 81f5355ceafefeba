// Acceptance suite: one entry per shipped verification target, each runnable
// standalone (`acceptance N`) or together (`acceptance all`). Every check
// prints a single PASS/FAIL line with the measured numbers.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "dasep/experiments.hpp"

using namespace dasep;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::filesystem::path out_root() {
    return std::filesystem::temp_directory_path() / "dasep_acceptance";
}

ExperimentResult run_cfg(const std::string& text, const std::string& sub) {
    ParseResult r = parse_config(text);
    if (!r.ok()) {
        std::string msg = "config error:";
        for (const auto& i : r.issues) msg += " [" + i.key + "] " + i.message;
        throw std::runtime_error(msg);
    }
    return run_experiment(*r.config, (out_root() / sub).string());
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// 1. Generator identity: exhaustive sweep, residual at float roundoff.
Outcome criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    auto res = run_cfg(
        "schema_version = 1\nexperiment = verify-generator\n"
        "generator.eps_grid = [1, 0.1, 0.01]\n"
        "generator.s_min = -20\ngenerator.s_max = 20\n",
        "c1");
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Outcome o;
    double resid = res.report["max_residual"];
    double budget = res.report["budget"];
    o.pass = res.pass && elapsed < 1.0;
    o.detail = "max_residual=" + fmt(resid) + " budget=" + fmt(budget) +
               " elapsed=" + fmt(elapsed) + "s";
    return o;
}

// 2. Martingale suite: mean-zero, empirical vs exact quadratic variation,
//    path-wise bound with zero violations.
Outcome criterion_2() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = verify-martingale\n"
        "model.eps = 0.1\nmartingale.window = 256\nmartingale.t_end = 50\n"
        "martingale.ensemble = 2000\nmartingale.checkpoints = 10\n"
        "martingale.sites = [-64, -32, 0, 32, 64]\nmartingale.duhamel_seeds = 0\n"
        "seed = 2026\n",
        "c2");
    Outcome o;
    o.pass = res.report["flags"]["mean_zero"] && res.report["flags"]["qv_match"] &&
             res.report["flags"]["bound"];
    o.detail = "max|mean m|/se=" + fmt(res.report["max_mean_over_se"]) +
               " max|qv gap|/se=" + fmt(res.report["max_qv_gap_over_se"]) +
               " bound_violations=" + std::to_string((std::uint64_t)res.report["bound_violations"]);
    return o;
}

// 3. Duhamel reconstruction against the simulated transform field.
Outcome criterion_3() {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        ModelParams p;
        p.eps = 0.1;
        p.domain = LineWindow{-64, 63};
        RngStream ri = RngStream::for_trajectory(0xd00dULL, seed);
        HeightFunction h0 = sample_stationary(p, p.domain, ri);
        RngStream rs = RngStream::for_trajectory(0xfaceULL, seed);
        Trajectory traj = simulate(h0, p, 2.0, {}, rs, {true, {0xfaceULL, seed}});
        std::vector<int64_t> observe;
        for (int64_t x = -16; x <= 16; ++x) observe.push_back(x);
        DuhamelResult dr = discrete_duhamel(traj, 2.0, observe);
        worst = std::max(worst, dr.max_abs_error / dr.field_scale);
    }
    Outcome o;
    o.pass = worst <= 1e-6;
    o.detail = "max_rel_error=" + fmt(worst) + " over 20 seeds (tol 1e-6)";
    return o;
}

// 4. Stationary measure: sampler chi^2, dynamic invariance, gaussian variance.
Outcome criterion_4() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = stationary\nmodel.eps = 0.1\n"
        "stationary.chi2_samples = 100000\nstationary.invariance_samples = 10000\n"
        "stationary.invariance_t = 10\nstationary.variance_eps = 0.001\n"
        "seed = 11\n",
        "c4");
    Outcome o;
    o.pass = res.pass;
    o.detail = "chi2_p=" + fmt(res.report["chi2_p"]) +
               " invariance_p=" + fmt(res.report["invariance_ks_p"]) +
               " var(sqrt(eps)s)=" + fmt(res.report["scaled_variance"]);
    return o;
}

// 5. Kernel identities: ODE oracle, mass, gradient-kernel decay, c1 < 1.
Outcome criterion_5() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = verify-kernels\nkernels.eps = 0.1\n"
        "kernels.times = [0.5, 5, 50]\nkernels.a = 0.25\n",
        "c5");
    Outcome o;
    o.pass = res.pass;
    o.detail = "bessel_vs_ode=" + fmt(res.report["bessel_vs_ode"]) +
               " mass_err=" + fmt(res.report["mass_error"]) +
               " slope=" + fmt(res.report["gradient_slope"]) +
               " c1=" + fmt(res.report["c1"]);
    return o;
}

// 6. SPDE solver: per-mode variance, martingale-problem residuals, chain rule.
Outcome criterion_6() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = spde\nspde.validate = true\n"
        "spde.ensemble = 10000\nspde.dt = 0.001\nseed = 6\n",
        "c6");
    Outcome o;
    o.pass = res.pass;
    o.detail = "mode_var_max_dev=" + fmt(res.report["mode_variance_max_dev_se"]) +
               "se  m/se=" + fmt(res.report["martingale_m_over_se"]) +
               " n/se=" + fmt(res.report["martingale_n_over_se"]) +
               " chain_p=" + fmt(res.report["chain_rule_ks_p"]);
    return o;
}

// 7. Full-line scaling limit at desk scale: stationary-start dynamic ASEP vs
//    the calibrated space-time OU solver. The lattice marginal carries an
//    atom of mass ~0.18 at height 0 when eps = 0.05, so the two-sample KS
//    distance against any continuous law is bounded below by ~0.089; the
//    0.05 target is not attainable by a lattice-valued field and the
//    threshold check reports that honestly.
Outcome criterion_7() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = converge\n"
        "converge.eps_grid = [0.2, 0.1, 0.05]\nconverge.T = 0.5\n"
        "converge.ensemble = 5000\nconverge.observe = [-1, 0, 1]\n"
        "converge.ks_threshold = 0.05\nseed = 77\n",
        "c7");
    Outcome o;
    o.pass = res.pass;
    std::string ks;
    for (const auto& row : res.report["per_eps"])
        ks += " D(eps=" + fmt(row["eps"]) + ")=" + fmt(row["ks_d"]);
    o.detail = "monotone=" + std::string(res.report["monotone_decreasing"] ? "yes" : "no") +
               ks + " threshold=0.05 B_cal=" + fmt(res.report["calibration"]["B"]);
    if (!res.report["flags"]["threshold"])
        o.detail += " [discreteness floor ~2*sqrt(eps)*phi(0)/2 = 0.089 at eps=0.05]";
    return o;
}

// 8. Periodic generalized model vs the calibrated periodic OU solver.
Outcome criterion_8() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = periodic-converge\n"
        "periodic.n_grid = [64, 128]\nperiodic.T = 0.5\nperiodic.ensemble = 3000\n"
        "periodic.ks_threshold = 0.07\nseed = 88\n",
        "c8");
    Outcome o;
    o.pass = res.report["flags"]["monotone"] && res.report["flags"]["threshold"];
    std::string ks;
    for (const auto& row : res.report["per_n"])
        ks += " D(N=" + std::to_string((int64_t)row["N"]) + ")=" + fmt(row["ks_d"]);
    o.detail = "monotone=" + std::string(res.report["monotone_decreasing"] ? "yes" : "no") +
               ks + " threshold=0.07 B_cal=" + fmt(res.report["calibration"]["B"]);
    return o;
}

// 9. Drift-decomposition constants: finite, and bounded (no >2x growth) as
//    eps decreases through the sweep.
Outcome criterion_9() {
    auto res = run_cfg(
        "schema_version = 1\nexperiment = periodic-converge\n"
        "periodic.n_grid = [16]\nperiodic.ensemble = 100\n"
        "periodic.sweep_eps = [0.1, 0.05, 0.01]\nperiodic.sweep_shat_max = 5\n"
        "seed = 99\n",
        "c9");
    Outcome o;
    o.pass = res.report["flags"]["sweep_stable"];
    std::string vals;
    for (const auto& row : res.report["sweep"])
        vals += " (eps=" + fmt(row["eps"]) + ": c0=" + fmt(row["c0"]) +
                ", c1=" + fmt(row["c1"]) + ")";
    o.detail = "fitted constants" + vals;
    return o;
}

// 10. Reproducibility: identical config and seed give byte-identical outputs.
Outcome criterion_10() {
    const std::string cfg =
        "schema_version = 1\nexperiment = simulate\nensemble.size = 4\n"
        "domain.kind = ring\ndomain.n = 32\nsim.t_end = 5\n"
        "sim.sample_times = [0, 2.5, 5]\nsim.keep_events = true\nseed = 1010\n";
    auto a = run_cfg(cfg, "c10_a");
    auto b = run_cfg(cfg, "c10_b");
    const std::string cfg2 =
        "schema_version = 1\nexperiment = stationary\nmodel.eps = 0.2\n"
        "stationary.chi2_samples = 2000\nstationary.invariance_check = false\n"
        "seed = 4\n";
    auto c = run_cfg(cfg2, "c10_c");
    auto d = run_cfg(cfg2, "c10_d");

    Outcome o;
    size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(a.out_dir)) {
        auto name = entry.path().filename();
        std::uint64_t h1 = hash_file(entry.path());
        std::uint64_t h2 = hash_file(b.out_dir / name);
        if (h1 != h2) o.pass = false;
        ++files;
    }
    for (const auto& entry : std::filesystem::directory_iterator(c.out_dir)) {
        auto name = entry.path().filename();
        if (hash_file(entry.path()) != hash_file(d.out_dir / name)) o.pass = false;
        ++files;
    }
    o.detail = std::to_string(files) + " files compared byte-for-byte across reruns";
    return o;
}

struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
};

const Entry kEntries[] = {
    {1, "generator-identity", criterion_1}, {2, "martingale-suite", criterion_2},
    {3, "duhamel-reconstruction", criterion_3}, {4, "stationary-measure", criterion_4},
    {5, "kernel-identities", criterion_5}, {6, "spde-solver", criterion_6},
    {7, "full-line-limit", criterion_7}, {8, "periodic-limit", criterion_8},
    {9, "drift-constants", criterion_9}, {10, "reproducibility", criterion_10},
};

} // namespace

int main(int argc, char** argv) {
    std::filesystem::create_directories(out_root());
    bool all = (argc < 2) || std::strcmp(argv[1], "all") == 0;
    int only = all ? 0 : std::atoi(argv[1]);

    bool ok = true;
    for (const Entry& e : kEntries) {
        if (!all && e.id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %02d [%s] %s  %s  (%.1fs)\n", e.id, e.name,
                    o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
