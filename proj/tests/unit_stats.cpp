#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dasep/stationary.hpp"
#include "dasep/stats.hpp"

using namespace dasep;
using Catch::Approx;

namespace {

// Test-local oracle: exact two-sample KS null tail by enumerating every
// interleaving of the pooled sample (no ties).
double ks_null_tail_bruteforce(double d, int n, int m) {
    std::vector<int> labels(static_cast<size_t>(n + m), 0);
    for (int i = 0; i < m; ++i) labels[static_cast<size_t>(n + i)] = 1;
    std::sort(labels.begin(), labels.end());
    long total = 0, exceed = 0;
    do {
        ++total;
        int ca = 0, cb = 0;
        double dmax = 0.0;
        for (int v : labels) {
            if (v == 0)
                ++ca;
            else
                ++cb;
            dmax = std::max(dmax, std::fabs(static_cast<double>(ca) / n -
                                            static_cast<double>(cb) / m));
        }
        if (dmax >= d - 1e-12) ++exceed;
    } while (std::next_permutation(labels.begin(), labels.end()));
    return static_cast<double>(exceed) / static_cast<double>(total);
}

} // namespace

TEST_CASE("ks statistic and p-values") {
    SECTION("identical samples have zero distance") {
        std::vector<double> a = {0.3, 1.2, -0.5, 2.2};
        REQUIRE(ks_statistic(a, a) == 0.0);
    }
    SECTION("exact small-sample tail matches brute-force enumeration") {
        std::vector<double> a = {0.1, 0.9, 1.7, 2.3, 3.1};
        std::vector<double> b = {0.4, 0.5, 2.0, 2.9};
        double d = ks_statistic(a, b);
        double exact = ks_exact_p_value(d, a.size(), b.size());
        double brute = ks_null_tail_bruteforce(d, static_cast<int>(a.size()),
                                               static_cast<int>(b.size()));
        REQUIRE(exact == Approx(brute).margin(1e-12));
        auto r = two_sample_ks(a, b);
        REQUIRE(r.exact);
        REQUIRE(r.p == Approx(brute).margin(1e-12));
    }
    SECTION("null p-values are roughly uniform (calibration run)") {
        const int reps = 150;
        const size_t n = 2000;
        std::vector<double> ps(reps);
        for (int r = 0; r < reps; ++r) {
            RngStream rng = RngStream::for_trajectory(50, static_cast<std::uint64_t>(r));
            std::vector<double> a(n), b(n);
            for (size_t i = 0; i < n; ++i) a[i] = rng.gaussian();
            for (size_t i = 0; i < n; ++i) b[i] = rng.gaussian();
            ps[static_cast<size_t>(r)] = two_sample_ks(a, b).p;
        }
        auto ks = one_sample_ks(ps, [](double x) { return std::clamp(x, 0.0, 1.0); });
        REQUIRE(ks.p > 0.01);
    }
    SECTION("a half-unit mean shift is detected decisively") {
        const size_t n = 10000;
        RngStream rng(99);
        std::vector<double> a(n), b(n);
        for (size_t i = 0; i < n; ++i) a[i] = rng.gaussian();
        for (size_t i = 0; i < n; ++i) b[i] = 0.5 + rng.gaussian();
        REQUIRE(two_sample_ks(a, b).p < 1e-6);
    }
}

TEST_CASE("chi-squared p-value sanity") {
    REQUIRE(chi_squared_p_value(3.841, 1) == Approx(0.05).margin(2e-4));
    REQUIRE(chi_squared_p_value(0.0, 5) == 1.0);
    REQUIRE(chi_squared_p_value(100.0, 5) < 1e-10);
}

TEST_CASE("moment tables") {
    std::vector<double> xs = {1.0, 2.0, 3.0, 4.0, 5.0};
    auto t = moments(xs);
    REQUIRE(t.mean == Approx(3.0));
    REQUIRE(t.var == Approx(2.5));
    REQUIRE_THROWS_AS(moments(std::vector<double>{1.0}), InsufficientSamples);
}

TEST_CASE("covariance matrices are positive semidefinite") {
    FieldEnsemble e;
    e.Ts = {0.0};
    e.Xs = {0.0, 0.5, 1.0};
    RngStream rng(5);
    for (int i = 0; i < 400; ++i) {
        double base = rng.gaussian();
        e.samples.push_back({base, base + 0.3 * rng.gaussian(), base + 0.6 * rng.gaussian()});
    }
    auto cov = cross_covariance(e, {0, 1, 2});
    REQUIRE(is_positive_semidefinite(cov, 1e-9));
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < i; ++j) REQUIRE(cov[i][j] == cov[j][i]);
}

TEST_CASE("ensemble comparison") {
    FieldEnsemble a, b;
    a.Ts = b.Ts = {0.0};
    a.Xs = b.Xs = {0.0};
    RngStream rng(6);
    for (int i = 0; i < 200; ++i) {
        a.samples.push_back({rng.gaussian()});
        b.samples.push_back({rng.gaussian()});
    }
    SECTION("an ensemble equals itself") {
        auto rep = ensemble_compare(a, a, {0});
        REQUIRE(rep.points[0].ks_d == 0.0);
        REQUIRE(rep.pass);
    }
    SECTION("small ensembles are rejected") {
        FieldEnsemble tiny = a;
        tiny.samples.resize(10);
        REQUIRE_THROWS_AS(ensemble_compare(tiny, b, {0}), InsufficientSamples);
    }
}

TEST_CASE("height rescaling") {
    SECTION("wedge at T = 0 is |X| on lattice points") {
        ModelParams p;
        p.eps = 0.1;
        p.domain = LineWindow{-40, 40};
        auto h0 = new_height(p.domain, Profile::wedge());
        Trajectory traj;
        traj.params = p;
        traj.initial = h0;
        traj.snapshots = {{0.0, h0}};
        auto vals = rescale_height(traj, p.eps, 1.0, {0.0}, {-1.0, 0.0, 2.0});
        // sqrt(eps) |eps^{-1} X|, evaluated exactly on lattice points
        REQUIRE(vals[0] == Approx(std::sqrt(p.eps) * 10.0));
        REQUIRE(vals[1] == 0.0);
        REQUIRE(vals[2] == Approx(std::sqrt(p.eps) * 20.0));
    }
    SECTION("recentring vanishes at alpha = 1 and is exact otherwise") {
        ModelParams p;
        p.eps = 0.2;
        p.domain = LineWindow{-10, 10};
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        Trajectory traj;
        traj.params = p;
        traj.initial = h0;
        traj.snapshots = {{0.0, h0}};
        auto v1 = rescale_height(traj, p.eps, 1.0, {0.0}, {0.0});
        REQUIRE(v1[0] == 0.0);
        double alpha = std::exp(2.0 * p.eps);  // log_q alpha = -2
        auto v2 = rescale_height(traj, p.eps, alpha, {0.0}, {0.0});
        REQUIRE(v2[0] == Approx(std::sqrt(p.eps) * 2.0));
    }
    SECTION("ring field is exactly 1-periodic") {
        ModelParams p;
        p.eps = 1.0 / 16.0;
        p.domain = Ring{16, 0};
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        Trajectory traj;
        traj.params = p;
        traj.initial = h0;
        traj.snapshots = {{0.0, h0}};
        // pairs whose unit shift is exact in floating point
        auto vals =
            rescale_height(traj, p.eps, 1.0, {0.0}, {0.25, 1.25, 0.5, 1.5});
        REQUIRE(vals[0] == vals[1]);
        REQUIRE(vals[2] == vals[3]);
    }
    SECTION("ring rescaling requires eps = 1/N") {
        ModelParams p;
        p.eps = 0.1;
        p.domain = Ring{16, 0};
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        Trajectory traj;
        traj.params = p;
        traj.initial = h0;
        traj.snapshots = {{0.0, h0}};
        REQUIRE_THROWS_AS(rescale_height(traj, 0.1, 1.0, {0.0}, {0.0}), GridMismatch);
    }
    SECTION("unscaling recovers integer heights") {
        ModelParams p;
        p.eps = 0.1;
        p.domain = LineWindow{-20, 20};
        RngStream rng(9);
        auto h0 = sample_stationary(p, p.domain, rng);
        Trajectory traj;
        traj.params = p;
        traj.initial = h0;
        traj.snapshots = {{0.0, h0}};
        std::vector<double> Xs;
        for (int64_t x = -5; x <= 5; ++x) Xs.push_back(p.eps * static_cast<double>(x));
        auto vals = rescale_height(traj, p.eps, 1.0, {0.0}, Xs);
        for (size_t i = 0; i < Xs.size(); ++i) {
            double s = vals[i] / std::sqrt(p.eps);
            REQUIRE(s == Approx(std::round(s)).margin(1e-9));
            REQUIRE(static_cast<int64_t>(std::llround(s)) == h0.at(-5 + static_cast<int64_t>(i)));
        }
    }
}

TEST_CASE("hopf-cole rescaling") {
    ModelParams p;
    p.eps = 0.1;
    p.domain = LineWindow{-30, 30};

    SECTION("zero height slice maps to the zero field") {
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        Trajectory traj;
        traj.params = p;
        traj.initial = h0;
        traj.snapshots = {{0.0, h0}};
        auto r = rescale_hopf_cole(traj, p.eps, {0.0}, {0.0});
        REQUIRE(r.values[0] == 0.0);  // s(0) = 0 at alpha = 1
    }
    SECTION("pointwise bound |Zcal| <= |shat| e^{sqrt(eps)|shat|} at T = 0") {
        RngStream rng(11);
        for (int rep = 0; rep < 20; ++rep) {
            auto h0 = sample_stationary(p, p.domain, rng);
            Trajectory traj;
            traj.params = p;
            traj.initial = h0;
            traj.snapshots = {{0.0, h0}};
            std::vector<double> Xs = {-1.0, -0.3, 0.0, 0.4, 1.0};
            auto zs = rescale_hopf_cole(traj, p.eps, {0.0}, Xs);
            auto ss = rescale_height(traj, p.eps, 1.0, {0.0}, Xs);
            for (size_t i = 0; i < Xs.size(); ++i) {
                double bound = std::fabs(ss[i]) *
                               std::exp(std::sqrt(p.eps) * std::fabs(ss[i]));
                REQUIRE(std::fabs(zs.values[i]) <= bound + 1e-9);
            }
        }
    }
    SECTION("taylor diagnostic shrinks with eps") {
        // stationary start, fixed macroscopic horizon
        std::vector<double> q90;
        for (double eps : {0.2, 0.1, 0.05}) {
            ModelParams pe;
            pe.eps = eps;
            double T = 0.1;
            double t_micro = T / (eps * eps);
            int64_t L = static_cast<int64_t>(2.0 / eps +
                                             6.0 * std::sqrt(2.0 * t_micro)) + 4;
            pe.domain = LineWindow{-L, L};
            std::vector<double> diags;
            for (size_t i = 0; i < 120; ++i) {
                RngStream ri = RngStream::for_trajectory(900 + static_cast<std::uint64_t>(1e3 * eps), i);
                auto h0 = sample_stationary(pe, pe.domain, ri);
                RngStream rs = RngStream::for_trajectory(901 + static_cast<std::uint64_t>(1e3 * eps), i);
                auto traj = simulate(h0, pe, t_micro, {t_micro}, rs);
                Trajectory shifted;
                shifted.params = pe;
                shifted.initial = h0;
                shifted.snapshots = traj.snapshots;
                auto r = rescale_hopf_cole(shifted, eps, {T}, {-1.0, 0.0, 1.0});
                diags.push_back(r.taylor_diagnostic);
            }
            std::sort(diags.begin(), diags.end());
            q90.push_back(diags[static_cast<size_t>(0.9 * diags.size())]);
        }
        REQUIRE(q90[2] < q90[0]);
    }
}

TEST_CASE("regularity diagnostics") {
    SECTION("constant fields pass with zero increments") {
        FieldEnsemble e;
        e.Ts = {0.0};
        e.Xs = {0.0, 0.5, 1.0};
        for (int i = 0; i < 100; ++i) e.samples.push_back({1.0, 1.0, 1.0});
        auto rep = regularity_report(e, 0.25, 0.2, 2, 0.1, 100.0);
        REQUIRE(rep.spatial_ratio_max == 0.0);
        REQUIRE_FALSE(rep.flagged);
    }
    SECTION("brownian paths calibrate the spatial exponent to 1/2") {
        FieldEnsemble e;
        e.Ts = {0.0};
        for (int j = 0; j <= 16; ++j) e.Xs.push_back(static_cast<double>(j) / 16.0);
        RngStream rng(15);
        for (int i = 0; i < 3000; ++i) {
            std::vector<double> w(e.Xs.size(), 0.0);
            for (size_t j = 1; j < w.size(); ++j)
                w[j] = w[j - 1] + rng.gaussian(0.0, std::sqrt(1.0 / 16.0));
            e.samples.push_back(std::move(w));
        }
        auto rep = regularity_report(e, 0.25, 0.2, 2, 0.1, 1e9);
        REQUIRE(rep.spatial_exponent == Approx(0.5).margin(0.05));
    }
    SECTION("stationary initial data has eps-stable constants") {
        std::vector<double> exp_norms, ratios;
        for (double eps : {0.1, 0.05}) {
            ModelParams p;
            p.eps = eps;
            int64_t L = static_cast<int64_t>(2.0 / eps) + 8;
            p.domain = LineWindow{-L, L};
            FieldEnsemble e;
            e.Ts = {0.0};
            e.Xs = {-1.0, -0.5, 0.0, 0.5, 1.0};
            for (size_t i = 0; i < 1500; ++i) {
                RngStream ri = RngStream::for_trajectory(7000 + static_cast<std::uint64_t>(1e3 * eps), i);
                auto h0 = sample_stationary(p, p.domain, ri);
                Trajectory traj;
                traj.params = p;
                traj.initial = h0;
                traj.snapshots = {{0.0, h0}};
                e.samples.push_back(rescale_height(traj, eps, 1.0, {0.0}, e.Xs));
            }
            auto rep = regularity_report(e, 0.25, 0.2, 2, eps, 1e9);
            exp_norms.push_back(rep.exp_moment_norm);
            ratios.push_back(rep.spatial_ratio_max);
        }
        REQUIRE(exp_norms[1] < 2.0 * exp_norms[0]);
        REQUIRE(ratios[1] < 2.0 * ratios[0]);
    }
}
