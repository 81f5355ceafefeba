#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <set>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dasep/config.hpp"
#include "dasep/experiments.hpp"
#include "dasep/io.hpp"
#include "dasep/rng.hpp"

using namespace dasep;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("double formatting round-trips the bit pattern") {
    RngStream rng(123);
    for (int i = 0; i < 2000; ++i) {
        double v;
        if (i % 3 == 0) {
            v = rng.gaussian() * std::pow(10.0, static_cast<double>(i % 60) - 30.0);
        } else {
            std::uint64_t bits = rng.next_u64();
            bits &= ~(0x7ffULL << 52);  // clear exponent to avoid nan/inf
            bits |= (static_cast<std::uint64_t>(512 + (i % 512)) << 52);
            std::memcpy(&v, &bits, sizeof(v));
        }
        std::string s = format_double(v);
        double back = std::strtod(s.c_str(), nullptr);
        REQUIRE(std::memcmp(&back, &v, sizeof(double)) == 0);
    }
}

TEST_CASE("csv builder keeps the fixed column order") {
    CsvBuilder csv({"a", "b", "c"});
    csv.row(1.5, static_cast<int64_t>(-3), std::string("x"));
    REQUIRE(csv.str() == "a,b,c\n1.5,-3,x\n");
    CsvBuilder empty({"n", "prob"});
    REQUIRE(empty.str() == "n,prob\n");  // header-only for empty data
}

TEST_CASE("config parsing") {
    SECTION("a minimal config picks up documented defaults") {
        auto r = parse_config("schema_version = 1\nexperiment = simulate\n");
        REQUIRE(r.ok());
        REQUIRE(r.config->kind == ExperimentKind::Simulate);
        REQUIRE(r.config->num("model.eps") == 0.1);
        REQUIRE(r.config->num("model.alpha") == 1.0);
        REQUIRE(r.config->integer("seed") == 42);
        REQUIRE(r.config->str("domain.kind") == "ring");
    }
    SECTION("negative eps is a range error at the dotted key") {
        auto r = parse_config(
            "schema_version = 1\nexperiment = simulate\nmodel.eps = -0.1\n");
        REQUIRE_FALSE(r.ok());
        REQUIRE(r.issues.size() == 1);
        REQUIRE(r.issues[0].kind == ConfigIssue::Kind::Range);
        REQUIRE(r.issues[0].key == "model.eps");
    }
    SECTION("ring parity violation is caught at validation time") {
        auto r = parse_config(
            "schema_version = 1\nexperiment = simulate\ndomain.kind = ring\n"
            "domain.n = 64\ndomain.chi = 3\n");
        REQUIRE_FALSE(r.ok());
        REQUIRE(r.issues[0].key == "domain.chi");
        REQUIRE(r.issues[0].message.find("chi == N mod 2") != std::string::npos);
    }
    SECTION("unknown keys are rejected") {
        auto r = parse_config(
            "schema_version = 1\nexperiment = simulate\nmodle.eps = 0.1\n");
        REQUIRE_FALSE(r.ok());
        REQUIRE(r.issues[0].message == "unknown key");
    }
    SECTION("all errors are collected in one pass") {
        auto r = parse_config(
            "schema_version = 1\nexperiment = simulate\nmodel.eps = -1\n"
            "bogus.key = 2\nmodel.alpha = -3\n");
        REQUIRE(r.issues.size() == 3);
    }
    SECTION("arrays and booleans parse") {
        auto r = parse_config(
            "schema_version = 1\nexperiment = simulate\n"
            "sim.sample_times = [0, 1.5, 3]\nsim.keep_events = true\n");
        REQUIRE(r.ok());
        REQUIRE(r.config->arr("sim.sample_times") == std::vector<double>{0.0, 1.5, 3.0});
        REQUIRE(r.config->flag("sim.keep_events"));
    }
}

TEST_CASE("manifest json round-trips") {
    nlohmann::json m;
    m["schema_version"] = 1;
    m["seed"] = {{"master", 42}, {"source", "config"}};
    m["outputs"] = {{"a.csv", "0011223344556677"}};
    std::string text = json_pretty(m);
    auto back = nlohmann::json::parse(text);
    REQUIRE(back == m);
}

TEST_CASE("written artifacts hash reproducibly") {
    auto dir = std::filesystem::temp_directory_path() / "dasep_io_test";
    std::filesystem::remove_all(dir);
    auto hashes = write_outputs({{"x.csv", "a,b\n1,2\n"}}, dir);
    REQUIRE(hashes.at("x.csv") == hex64(hash_string("a,b\n1,2\n")));
    REQUIRE(hex64(hash_file(dir / "x.csv")) == hashes.at("x.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("experiment reruns are byte-identical") {
    auto base = std::filesystem::temp_directory_path() / "dasep_det_test";
    std::filesystem::remove_all(base);
    auto r = parse_config(
        "schema_version = 1\nexperiment = simulate\nensemble.size = 3\n"
        "domain.kind = ring\ndomain.n = 16\nsim.t_end = 2\n"
        "sim.sample_times = [0, 1, 2]\nseed = 7\n");
    REQUIRE(r.ok());
    auto res1 = run_experiment(*r.config, (base / "a").string());
    auto res2 = run_experiment(*r.config, (base / "b").string());
    for (const auto& entry : std::filesystem::directory_iterator(base / "a")) {
        auto name = entry.path().filename();
        CAPTURE(name.string());
        REQUIRE(slurp(entry.path()) == slurp(base / "b" / name));
    }
    REQUIRE(res1.manifest["outputs"] == res2.manifest["outputs"]);
    std::filesystem::remove_all(base);
}

TEST_CASE("thread count does not change the bytes") {
    auto base = std::filesystem::temp_directory_path() / "dasep_thread_test";
    std::filesystem::remove_all(base);
    std::string text =
        "schema_version = 1\nexperiment = simulate\nensemble.size = 8\n"
        "domain.kind = ring\ndomain.n = 16\nsim.t_end = 1\n"
        "sim.sample_times = [1]\nseed = 9\n";
    auto r1 = parse_config(text + "threads = 1\n");
    auto r4 = parse_config(text + "threads = 4\n");
    REQUIRE(r1.ok());
    REQUIRE(r4.ok());
    run_experiment(*r1.config, (base / "t1").string());
    run_experiment(*r4.config, (base / "t4").string());
    for (const auto& entry : std::filesystem::directory_iterator(base / "t1")) {
        auto name = entry.path().filename();
        if (name == "manifest.json") continue;  // echoes the thread count
        REQUIRE(slurp(entry.path()) == slurp(base / "t4" / name));
    }
    std::filesystem::remove_all(base);
}

TEST_CASE("derived trajectory seeds are distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 5000; ++i)
        seen.insert(dasep::RngStream::for_trajectory(42, i).next_u64());
    REQUIRE(seen.size() == 5000);
}

TEST_CASE("env seed override is recorded in the manifest") {
    auto base = std::filesystem::temp_directory_path() / "dasep_env_test";
    std::filesystem::remove_all(base);
    auto r = parse_config(
        "schema_version = 1\nexperiment = simulate\nensemble.size = 1\n"
        "domain.kind = ring\ndomain.n = 8\nsim.t_end = 0.5\nsim.sample_times = [0.5]\n");
    REQUIRE(r.ok());
    setenv("DASEP_SEED", "1234", 1);
    auto res = run_experiment(*r.config, base.string());
    unsetenv("DASEP_SEED");
    REQUIRE(res.manifest["seed"]["master"] == 1234);
    REQUIRE(res.manifest["seed"]["source"] == "env");
    std::filesystem::remove_all(base);
}
