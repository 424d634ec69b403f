#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

namespace {

const std::string kCli = QLINK_CLI_PATH;
const std::filesystem::path kConfigs = std::filesystem::path(QLINK_SOURCE_DIR) / "configs";

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const oracle::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = kCli + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kSmallConfig = R"({
  "pass": {"id": "cli", "r_min_m": 8.2e6, "v_tangential_mps": 5000, "t_closest_s": 5},
  "schedule": {"duration_s": 10},
  "budget": {"atmosphere": {"t_zenith": 1.0}},
  "fading": {"ln_sigma": 0.5},
  "sim": {"mu_sat": 40, "seed": 3}
})";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate is byte-identical for a fixed seed and honours --seed") {
    oracle::TempDir dir;
    write(dir / "c.json", kSmallConfig);
    REQUIRE(run(dir, "simulate --config " + (dir / "c.json").string() + " --out " + (dir / "a.csv").string()).code == 0);
    REQUIRE(run(dir, "simulate --config " + (dir / "c.json").string() + " --out " + (dir / "b.csv").string()).code == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    CHECK(slurp(dir / "a.csv.meta.json") == slurp(dir / "b.csv.meta.json"));
    REQUIRE(run(dir, "simulate --config " + (dir / "c.json").string() + " --out " + (dir / "s.csv").string() +
                         " --seed 4")
                .code == 0);
    CHECK(slurp(dir / "a.csv") != slurp(dir / "s.csv"));
    CHECK(nlohmann::json::parse(slurp(dir / "s.csv.meta.json"))["seed"] == 4);
  }

  TEST_CASE("no signal and no dark counts writes a header-only CSV") {
    oracle::TempDir dir;
    write(dir / "c.json", R"({"pass": {}, "schedule": {"duration_s": 1}, "sim": {"mu_sat": 0, "dark_rate_hz": 0}})");
    CHECK(run(dir, "simulate --config " + (dir / "c.json").string() + " --out " + (dir / "t.csv").string()).code == 0);
    CHECK(slurp(dir / "t.csv") == "time_ps,channel\n");
  }

  TEST_CASE("analyze writes a report and re-ingestible histograms") {
    oracle::TempDir dir;
    write(dir / "c.json", kSmallConfig);
    const auto cfg = (dir / "c.json").string();
    REQUIRE(run(dir, "simulate --config " + cfg + " --out " + (dir / "t.csv").string()).code == 0);
    const auto r = run(dir, "analyze --tags " + (dir / "t.csv").string() + " --config " + cfg + " --report " +
                                (dir / "r.json").string() + " --hist-dir " + (dir / "h").string());
    REQUIRE(r.code == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "r.json"));
    for (const char* key : {"generated_at", "config_digest", "response_fit", "frames", "arts", "lognormal", "mu_sat",
                            "summary"})
      CHECK(rep.contains(key));
    CHECK(rep["stream"]["digest_matches"] == true);
    CHECK(rep["frames"].size() == 50);
    CHECK(std::filesystem::exists(dir / "h" / "delta_histogram.csv"));
    CHECK(std::filesystem::exists(dir / "h" / "rate_histogram.csv"));

    const auto fit = run(dir, "fit --hist " + (dir / "h" / "delta_histogram.csv").string());
    REQUIRE(fit.code == 0);
    const auto f = nlohmann::json::parse(fit.out);
    CHECK(f["sigma_ps"].get<double>() == doctest::Approx(rep["response_fit"]["sigma_ps"].get<double>()).epsilon(1e-6));

    // reports differ only in generated_at
    REQUIRE(run(dir, "analyze --tags " + (dir / "t.csv").string() + " --config " + cfg + " --report " +
                         (dir / "r2.json").string())
                .code == 0);
    auto a = rep, b = nlohmann::json::parse(slurp(dir / "r2.json"));
    a.erase("generated_at");
    b.erase("generated_at");
    CHECK(a == b);
  }

  TEST_CASE("analyze error codes") {
    oracle::TempDir dir;
    write(dir / "c.json", kSmallConfig);
    write(dir / "empty.csv", "time_ps,channel\n");
    const auto cfg = (dir / "c.json").string();
    auto r = run(dir, "analyze --tags " + (dir / "empty.csv").string() + " --config " + cfg + " --report -");
    CHECK(r.code == 4);
    CHECK(nlohmann::json::parse(r.err)["error"] == "EmptyInput");
    r = run(dir, "analyze --tags " + (dir / "missing.csv").string() + " --config " + cfg + " --report -");
    CHECK(r.code == 3);
    write(dir / "bad.csv", "time_ps,channel\n5,1\n3,1\n");
    r = run(dir, "analyze --tags " + (dir / "bad.csv").string() + " --config " + cfg + " --report -");
    CHECK(r.code == 3);
    CHECK(r.err.find("FormatError") != std::string::npos);
    write(dir / "bad.json", R"({"analysis": {"frame_ms": -5}})");
    r = run(dir, "analyze --tags " + (dir / "empty.csv").string() + " --config " + (dir / "bad.json").string() +
                     " --report -");
    CHECK(r.code == 2);
    CHECK(r.err.find("/analysis/frame_ms") != std::string::npos);
  }

  TEST_CASE("budget") {
    oracle::TempDir dir;
    write(dir / "b.json", R"({"budget": {}})");
    auto r = run(dir, "budget --config " + (dir / "b.json").string() + " --range-km 8200");
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["t_diff_db"].get<double>() == doctest::Approx(-55.0).epsilon(0.2 / 55.0));
    CHECK(j["aperture_urad"].get<double>() == doctest::Approx(103.0).epsilon(0.01));
    CHECK(j["omega_sr"].get<double>() == doctest::Approx(8.40e-9).epsilon(0.001));
    CHECK(j["mu_rec_per_mu_sat"].get<double>() > 0.0);
    r = run(dir, "budget --config " + (dir / "b.json").string() + " --range-km 16400");
    CHECK(nlohmann::json::parse(r.out)["t_diff_db"].get<double>() == doctest::Approx(-61.0).epsilon(0.2 / 61.0));
    write(dir / "nb.json", R"({"pass": {}})");
    CHECK(run(dir, "budget --config " + (dir / "nb.json").string() + " --range-km 8200").code == 2);
  }

  TEST_CASE("scenario projection from a report") {
    oracle::TempDir dir;
    write(dir / "r.json", R"({"summary": {"rate_cps": 210, "snr": 7, "mu_sat": 16, "eta_rx": 0.13}})");
    const auto rep = (dir / "r.json").string();
    auto r = run(dir, "scenario --report " + rep + " --gain-db 20 --eta-rx 1 --mu-sat 1 --background dark");
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["rate_cps"].get<double>() == doctest::Approx(10100.0).epsilon(0.05));
    CHECK(j["snr"].get<double>() == doctest::Approx(337.0).epsilon(0.1));
    r = run(dir, "scenario --report " + rep);
    j = nlohmann::json::parse(r.out);
    CHECK(j["rate_cps"] == 210.0);
    CHECK(j["snr"] == 7.0);
    CHECK(run(dir, "scenario --report " + rep + " --mu-sat 0").code == 2);
    CHECK(run(dir, "scenario --report " + rep + " --mu-sat -2").code == 2);
    CHECK(run(dir, "scenario --report " + rep + " --eta-rx 0").code == 2);
    CHECK(run(dir, "scenario --report " + (dir / "none.json").string()).code == 3);
  }

  TEST_CASE("usage") {
    oracle::TempDir dir;
    CHECK(run(dir, "--help").code == 0);
    CHECK(run(dir, "simulate --help").out.find("--seed") != std::string::npos);
    CHECK(run(dir, "").code == 2);
    CHECK(run(dir, "frobnicate").code == 2);
    CHECK(run(dir, "budget --range-km 1").code == 2);
  }

  TEST_CASE("reference LAGEOS-II config runs quickly") {
    oracle::TempDir dir;
    const auto start = std::chrono::steady_clock::now();
    REQUIRE(run(dir, "simulate --config " + (kConfigs / "lageos2.json").string() + " --out " + (dir / "t.csv").string())
                .code == 0);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(seconds < 60.0);
    CHECK(run(dir, "analyze --tags " + (dir / "t.csv").string() + " --config " + (kConfigs / "lageos2.json").string() +
                       " --report " + (dir / "r.json").string())
              .code == 0);
  }
}
