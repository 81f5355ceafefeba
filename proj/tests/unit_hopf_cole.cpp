#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dasep/hopf_cole.hpp"
#include "dasep/stationary.hpp"
#include "dasep/stats.hpp"

using namespace dasep;
using Catch::Approx;

TEST_CASE("transform values") {
    SECTION("zero height gives zero field at alpha = 1") {
        REQUIRE(transform_z(0.3, 1.7, 0.0) == 0.0);
    }
    SECTION("q = 1/4, s = 2 at t = 0 gives q^{-1} - q = 3.75") {
        double eps = std::log(4.0);
        REQUIRE(transform_z(eps, 0.0, 2.0) == Approx(3.75).epsilon(1e-14));
    }
    SECTION("field over a trajectory matches the per-site formula") {
        ModelParams p;
        p.eps = 0.2;
        p.domain = Ring{8, 0};
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        auto traj = simulate(h0, p, 2.0, {0.0, 2.0}, RngStream(3));
        auto f = hopf_cole_transform(traj, 1.0);
        REQUIRE(f.times.size() == 2);
        REQUIRE(f.theta1 == Approx(theta1(p.eps)));
        for (size_t i = 0; i < f.sites.size(); ++i) {
            double s = static_cast<double>(traj.snapshots[1].second.values()[i]);
            REQUIRE(f.z[1][i] == Approx(transform_z(p.eps, 2.0, s)).epsilon(1e-14));
        }
    }
}

TEST_CASE("transform and martingale paths export as long-format csv") {
    ModelParams p;
    p.eps = 0.2;
    p.domain = LineWindow{-4, 4};
    auto h0 = new_height(p.domain, Profile::flat_alternating());
    auto traj = simulate(h0, p, 1.0, {0.0, 1.0}, RngStream(21), {true, {}});
    auto field = hopf_cole_transform(traj, 1.0);
    std::ostringstream os;
    write_transform_csv(os, field);
    REQUIRE(os.str().rfind("time,site,value\n", 0) == 0);
    auto mp = martingale_path(traj, 0, {0.5, 1.0});
    std::ostringstream ms;
    write_martingale_csv(ms, mp);
    std::string text = ms.str();
    REQUIRE(text.rfind("time,site,value\n", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("q-to-z closed identity holds to near machine precision") {
    RngStream rng(7);
    for (int i = 0; i < 500; ++i) {
        double eps = 0.01 + 0.5 * rng.uniform01();
        double s = std::floor(41.0 * rng.uniform01()) - 20.0;
        REQUIRE(q_to_z_residual(eps, s) < 1e-12);
    }
}

TEST_CASE("theta1 scaling") {
    for (double eps : {1.0, 0.3, 0.1, 0.05, 0.01}) {
        double t1 = theta1(eps);
        double r = -std::expm1(-eps / 2.0);
        REQUIRE(t1 == Approx(r * r).epsilon(1e-14));
        REQUIRE(std::fabs(t1 / (eps * eps) - 0.25) <= eps / 4.0);
    }
}

TEST_CASE("generator identity is exact for every local configuration") {
    SECTION("slope sites satisfy theta1 Z = (theta2/2) Lap Z") {
        for (double eps : {1.0, 0.1}) {
            for (int64_t s = -20; s <= 20; ++s) {
                double r = generator_residual(eps, static_cast<double>(s - 1),
                                              static_cast<double>(s),
                                              static_cast<double>(s + 1));
                double scale = std::max(1.0, std::fabs(transform_z(eps, 0.0, s)));
                REQUIRE(std::fabs(r) <= 1e-12 * scale);
            }
        }
    }
    SECTION("full sweep over eps, heights and slope patterns") {
        GeneratorCheck chk = generator_identity_check({1.0, 0.1, 0.01}, -20, 20);
        REQUIRE(chk.max_residual <= 1e-10 * chk.max_abs_z);
    }
    SECTION("alpha is a pure height shift of the residual profile") {
        double eps = 0.2;
        double alpha = std::exp(3.0 * eps);  // log_q(alpha) = -3
        GeneratorCheck a = generator_identity_check({eps}, -6, 6, alpha);
        GeneratorCheck b = generator_identity_check({eps}, -3, 9, 1.0);
        REQUIRE(a.max_residual == Approx(b.max_residual).margin(1e-13));
        REQUIRE(a.max_abs_z == Approx(b.max_abs_z).margin(1e-11));
    }
}

TEST_CASE("quadratic variation rates") {
    SECTION("slope sites carry no quadratic variation") {
        QvRate r = qv_rate(0.1, -1.0, 0.0, 1.0, 0.0);
        REQUIRE(r.exact == 0.0);
        REQUIRE(r.leading == 0.0);
    }
    SECTION("printed leading form at a local maximum, direct evaluation") {
        double eps = 0.1, q = std::exp(-eps);
        QvRate r = qv_rate(eps, -1.0, 0.0, -1.0, 0.0);
        double expected = (eps * eps / 4.0) / q * 2.0 * (1.0 / q + 1.0) * 2.0;
        REQUIRE(r.leading == Approx(expected).epsilon(1e-13));
    }
    SECTION("exact rate equals rate times squared jump") {
        double eps = std::log(4.0);  // q = 1/4
        // local max at s=2: down rate * (Z(0)-Z(2))^2 = 0.85 * 3.75^2
        QvRate r = qv_rate(eps, 1.0, 2.0, 1.0, 0.0);
        REQUIRE(r.exact == Approx(0.85 * 3.75 * 3.75).epsilon(1e-13));
    }
    SECTION("exact rate never exceeds the quadratic bound") {
        for (double eps : {0.2, 0.1, 0.05, 0.01}) {
            for (int64_t s = -40; s <= 40; ++s) {
                for (int dl : {-1, 1}) {
                    for (int dr : {-1, 1}) {
                        QvRate r = qv_rate(eps, s + dl, s, s + dr, 0.3);
                        REQUIRE(r.exact <= r.upper_bound * (1.0 + 1e-12));
                        REQUIRE(r.leading <= r.upper_bound * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
    SECTION("exact rate is twice the printed leading term up to O(eps)") {
        // The eps-expanded form under-counts the active extremum by 2: the
        // measured ratio is 2 + O(eps), uniformly over states.
        for (double eps : {0.2, 0.1, 0.05, 0.01}) {
            for (int64_t s = -30; s <= 30; ++s) {
                for (int pattern : {-1, +1}) {
                    QvRate r = qv_rate(eps, s + pattern, s, s + pattern, 0.0);
                    REQUIRE(r.exact > 0.0);
                    REQUIRE(std::fabs(r.exact - 2.0 * r.leading) <= 5.0 * eps * r.leading);
                }
            }
        }
    }
}

TEST_CASE("gradient identity residual") {
    ModelParams p;
    p.eps = 0.05;
    p.domain = Ring{64, 0};

    SECTION("pure slope state evaluates directly") {
        ModelParams pm = p;
        pm.domain = Ring{16, 16};
        auto h = new_height(pm.domain, Profile::max_slope());
        double res = gradient_identity_residual(h, 3, 0.0, pm);
        // grad+ s grad- s = 1 and the Z-gradient product is computable
        double z2 = transform_z(pm.eps, 0.0, 3.0);
        double gp = transform_z(pm.eps, 0.0, 4.0) - z2;
        double gm = z2 - transform_z(pm.eps, 0.0, 2.0);
        REQUIRE(res == Approx(gp * gm / (pm.eps * pm.eps) - 1.0).epsilon(1e-12));
    }
    SECTION("bound holds over random stationary states") {
        RngStream rng(31);
        ModelParams pl = p;
        pl.domain = LineWindow{-40, 40};
        for (int rep = 0; rep < 50; ++rep) {
            auto h = sample_stationary(pl, pl.domain, rng);
            for (int64_t x = -30; x <= 30; x += 3) {
                double res = gradient_identity_residual(h, x, 0.0, pl);
                double z = transform_z(pl.eps, 0.0, static_cast<double>(h.at(x)));
                REQUIRE(std::fabs(res) <= 0.25 * z * z + 10.0 * pl.eps);
            }
        }
    }
}

TEST_CASE("martingale path extraction") {
    SECTION("frozen slope region keeps the martingale at zero") {
        ModelParams p;
        p.eps = 0.15;
        p.domain = LineWindow{-8, 8};
        auto h0 = new_height(p.domain, Profile::max_slope());
        auto traj = simulate(h0, p, 5.0, {}, RngStream(2), {true, {}});
        REQUIRE(traj.event_count == 0);
        auto mp = martingale_path(traj, 0, {1.0, 2.0, 5.0});
        for (double m : mp.m) REQUIRE(std::fabs(m) < 1e-12);
        for (double q : mp.qv_emp) REQUIRE(q == 0.0);
    }
    SECTION("jumps of M are exactly the jumps of Z") {
        ModelParams p;
        p.eps = 0.2;
        p.domain = LineWindow{-16, 16};
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        auto traj = simulate(h0, p, 3.0, {}, RngStream(8), {true, {}});
        auto mp = martingale_path(traj, 0, {3.0});
        // recompute sum of squared Z-jumps at x=0 from the event log
        HeightFunction h = h0;
        double acc = 0.0;
        for (const Event& ev : traj.events) {
            if (ev.site == 0) {
                double before = transform_z(p.eps, ev.time, static_cast<double>(h.at(0)));
                double after = transform_z(p.eps, ev.time,
                                           static_cast<double>(h.at(0)) + 2.0 * ev.direction);
                acc += (after - before) * (after - before);
            }
            h.apply_flip(ev.site, 2 * static_cast<int64_t>(ev.direction));
        }
        REQUIRE(mp.qv_emp.back() == Approx(acc).epsilon(1e-12));
        REQUIRE(mp.bound_violations == 0);
    }
    SECTION("ensemble mean of the martingale stays near zero (light)") {
        ModelParams p;
        p.eps = 0.1;
        p.domain = LineWindow{-32, 32};
        const size_t n = 400;
        const std::vector<double> cks = {2.0, 6.0, 10.0};
        std::vector<KahanSum> sum(cks.size()), sumsq(cks.size());
        for (size_t i = 0; i < n; ++i) {
            RngStream ri = RngStream::for_trajectory(606, i);
            auto h0 = sample_stationary(p, p.domain, ri);
            RngStream rs = RngStream::for_trajectory(707, i);
            auto traj = simulate(h0, p, 10.0, {}, rs, {true, {}});
            auto mp = martingale_path(traj, 0, cks);
            for (size_t c = 0; c < cks.size(); ++c) {
                sum[c].add(mp.m[c]);
                sumsq[c].add(mp.m[c] * mp.m[c]);
            }
        }
        for (size_t c = 0; c < cks.size(); ++c) {
            double mean = sum[c].value() / n;
            double var = sumsq[c].value() / n - mean * mean;
            REQUIRE(std::fabs(mean) < 4.0 * std::sqrt(var / n));
        }
    }
    SECTION("missing event log is reported") {
        ModelParams p;
        p.eps = 0.1;
        p.domain = LineWindow{-8, 8};
        auto h0 = new_height(p.domain, Profile::flat_alternating());
        auto traj = simulate(h0, p, 2.0, {}, RngStream(5));  // keep_events = false
        if (traj.event_count > 0)
            REQUIRE_THROWS_AS(martingale_path(traj, 0, {1.0}), MissingEventLog);
    }
}
