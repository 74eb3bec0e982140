#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "cn2/models.hpp"
#include "cn2/sounding.hpp"

// End-to-end tests that drive the built binary. The test runner gets the
// binary path through CN2PROFILER_BIN (set by ctest).

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string cli_path() {
    const char* env = std::getenv("CN2PROFILER_BIN");
    if (env && *env) return env;
    return "build/tools/cn2profiler";  // manual runs from the repo root
}

struct Workdir {
    fs::path dir;
    Workdir() {
        static int counter = 0;
        dir = fs::temp_directory_path() /
              ("cn2cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(dir);
    }
    ~Workdir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    fs::path operator/(const std::string& name) const { return dir / name; }
};

int run_cli(const std::string& args, const Workdir& wd) {
    const std::string cmd = cli_path() + " " + args + " > " +
                            (wd / "stdout.txt").string() + " 2> " +
                            (wd / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Synthetic but physically plausible ascent: hydrostatic pressure, a
/// standard lapse rate with a tropopause, and seeded temperature jitter so
/// the estimator has fluctuations to work with.
void write_sounding(const fs::path& path, double top_m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> jitter(0.0, 0.05);
    std::ofstream out(path);
    out << "altitude_m,pressure_hPa,temperature_K\n";
    for (double z = 0.0; z <= top_m; z += 10.0) {
        const double p = 1013.25 * std::exp(-z / 8000.0);
        const double t_base = z < 11000.0 ? 288.15 - 0.0065 * z : 216.65;
        out << z << ',' << p << ',' << t_base + jitter(rng) << '\n';
    }
}

void write_profile_csv(const fs::path& path, double z0, double z1, double dz,
                       const std::function<double(double)>& f) {
    std::ofstream out(path);
    out << std::setprecision(17);
    out << "altitude_m,cn2_m_23\n";
    for (double z = z0; z <= z1 + 1e-9; z += dz) out << z << ',' << f(z) << '\n';
}

} // namespace

TEST_CASE("compute produces one profile per passing input and a summary") {
    Workdir wd;
    write_sounding(wd / "a.csv", 31000.0, 1);
    write_sounding(wd / "b.csv", 31000.0, 2);
    write_sounding(wd / "low.csv", 25000.0, 3);  // below the 30 km ceiling

    const int code = run_cli("compute " + (wd / "a.csv").string() + " " +
                                 (wd / "b.csv").string() + " " + (wd / "low.csv").string() +
                                 " --out " + (wd / "out").string() + " --dz 100",
                             wd);
    CHECK(code == 0);
    CHECK(fs::exists(wd / "out" / "a.cn2.csv"));
    CHECK(fs::exists(wd / "out" / "b.cn2.csv"));
    CHECK_FALSE(fs::exists(wd / "out" / "low.cn2.csv"));

    auto summary = json::parse(slurp(wd / "out" / "summary.json"));
    CHECK(summary["processed"] == 2);
    CHECK(summary["skipped_ceiling"] == 1);
    CHECK(summary["failed_parse"] == 0);
    CHECK(summary["config"]["dz_m"] == 100.0);

    // first altitude honors the delta + omega*dz offset (omega=2, m=1)
    std::istringstream prof(slurp(wd / "out" / "a.cn2.csv"));
    std::string header, first;
    std::getline(prof, header);
    std::getline(prof, first);
    CHECK(header == "altitude_m,cn2_m_23");
    CHECK(std::stod(first) >= 300.0);
}

TEST_CASE("compute is deterministic across runs and thread counts") {
    Workdir wd;
    write_sounding(wd / "a.csv", 31000.0, 7);
    write_sounding(wd / "b.csv", 31000.0, 8);
    REQUIRE(run_cli("compute " + (wd / "a.csv").string() + " " + (wd / "b.csv").string() +
                        " --out " + (wd / "r1").string() + " --threads 1",
                    wd) == 0);
    REQUIRE(run_cli("compute " + (wd / "a.csv").string() + " " + (wd / "b.csv").string() +
                        " --out " + (wd / "r4").string() + " --threads 4",
                    wd) == 0);
    CHECK(slurp(wd / "r1" / "a.cn2.csv") == slurp(wd / "r4" / "a.cn2.csv"));
    CHECK(slurp(wd / "r1" / "b.cn2.csv") == slurp(wd / "r4" / "b.cn2.csv"));
}

TEST_CASE("compute skipping everything exits with the empty-result code") {
    Workdir wd;
    write_sounding(wd / "low.csv", 20000.0, 4);
    const int code = run_cli("compute " + (wd / "low.csv").string() + " --out " +
                                 (wd / "out").string(),
                             wd);
    CHECK(code == 5);
    auto summary = json::parse(slurp(wd / "out" / "summary.json"));
    CHECK(summary["skipped_ceiling"] == 1);
}

TEST_CASE("compute counts unparsable inputs") {
    Workdir wd;
    write_sounding(wd / "good.csv", 31000.0, 5);
    std::ofstream(wd / "bad.csv") << "not,a,sounding\n1,2,3\n";
    const int code = run_cli("compute " + (wd / "good.csv").string() + " " +
                                 (wd / "bad.csv").string() + " --out " +
                                 (wd / "out").string(),
                             wd);
    CHECK(code == 0);  // one profile still produced
    auto summary = json::parse(slurp(wd / "out" / "summary.json"));
    CHECK(summary["processed"] == 1);
    CHECK(summary["failed_parse"] == 1);
}

TEST_CASE("compute applies metadata sidecars") {
    Workdir wd;
    write_sounding(wd / "a.csv", 31000.0, 6);
    std::ofstream(wd / "a.json")
        << R"({"station_id":"TEST1","elevation_m":150.0,"launch_time":"2020-01-02T00:00:00Z"})";
    REQUIRE(run_cli("compute " + (wd / "a.csv").string() + " --out " +
                        (wd / "out").string(),
                    wd) == 0);
    CHECK(fs::exists(wd / "out" / "a.cn2.csv"));
}

TEST_CASE("missing input file is an IO error") {
    Workdir wd;
    CHECK(run_cli("compute " + (wd / "nope.csv").string() + " --out " +
                      (wd / "out").string(),
                  wd) == 2);
}

TEST_CASE("unknown subcommand is a usage error") {
    Workdir wd;
    CHECK(run_cli("frobnicate", wd) == 1);
    CHECK(run_cli("--help", wd) == 0);
}

TEST_CASE("average combines computed profiles") {
    Workdir wd;
    write_profile_csv(wd / "p1.csv", 300.0, 5000.0, 100.0, [](double) { return 1e-16; });
    write_profile_csv(wd / "p2.csv", 300.0, 5000.0, 100.0, [](double) { return 3e-16; });
    REQUIRE(run_cli("average " + (wd / "p1.csv").string() + " " + (wd / "p2.csv").string() +
                        " --out " + (wd / "mean.csv").string(),
                    wd) == 0);
    std::istringstream mean(slurp(wd / "mean.csv"));
    std::string line;
    std::getline(mean, line);  // header
    std::getline(mean, line);
    const auto comma = line.find(',');
    CHECK(std::stod(line.substr(comma + 1)) == doctest::Approx(2e-16));
}

TEST_CASE("synth output is reproducible byte for byte") {
    Workdir wd;
    const std::string flags = " --n 2048 --dz 0.5 --seed 42 --out ";
    REQUIRE(run_cli("synth" + flags + (wd / "f1.csv").string(), wd) == 0);
    REQUIRE(run_cli("synth" + flags + (wd / "f2.csv").string(), wd) == 0);
    CHECK(slurp(wd / "f1.csv") == slurp(wd / "f2.csv"));
    REQUIRE(run_cli("synth --n 2048 --dz 0.5 --seed 43 --out " + (wd / "f3.csv").string(),
                    wd) == 0);
    CHECK(slurp(wd / "f1.csv") != slurp(wd / "f3.csv"));
}

TEST_CASE("synth rejects a non-power-of-two count") {
    Workdir wd;
    CHECK(run_cli("synth --n 1000 --out " + (wd / "f.csv").string(), wd) == 3);
}

TEST_CASE("study emits the documented CSV and respects seeds") {
    Workdir wd;
    const std::string flags = "study --dz-list 2,20 --L0-list 50 --omega-list 1,2 "
                              "--trials 2 --samples 2048 --seed 11 --out ";
    REQUIRE(run_cli(flags + (wd / "s1.csv").string(), wd) == 0);
    REQUIRE(run_cli(flags + (wd / "s2.csv").string(), wd) == 0);
    const auto s1 = slurp(wd / "s1.csv");
    CHECK(s1 == slurp(wd / "s2.csv"));
    CHECK(s1.rfind("dz_m,L0_m,omega,m,trials,ratio_mean,ratio_std\n", 0) == 0);
    // 2 dz x 1 L0 x 2 omega x 1 m = 4 data rows
    CHECK(std::count(s1.begin(), s1.end(), '\n') == 5);
}

TEST_CASE("calibrate recovers a factor of ten against HV-5/7") {
    Workdir wd;
    write_profile_csv(wd / "tenth.csv", 1000.0, 4000.0, 100.0,
                      [](double z) { return cn2::hv_cn2(z, cn2::hv57()) / 10.0; });
    REQUIRE(run_cli("calibrate " + (wd / "tenth.csv").string() + " --out " +
                        (wd / "report.json").string(),
                    wd) == 0);
    auto report = json::parse(slurp(wd / "report.json"));
    CHECK(report["scale_factor"].get<double>() == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(report["residual_log10_rms"].get<double>() < 1e-12);
    CHECK(report["used_levels"] == 31);
}

TEST_CASE("calibrate rejects a profile CSV with the wrong header") {
    Workdir wd;
    std::ofstream(wd / "bad.csv") << "altitude_m,foo\n1000,1\n";
    CHECK(run_cli("calibrate " + (wd / "bad.csv").string() + " --out " +
                      (wd / "r.json").string(),
                  wd) == 3);
}

TEST_CASE("fit recovers generator parameters end to end") {
    Workdir wd;
    cn2::GeneralizedHVParams truth;
    truth.A = 1.32e-13;
    truth.B = 2.7e-16;
    truth.C = 2.07e-4;
    truth.D = 1.37e-17;
    truth.H_B = 1645.0;
    truth.H_C = 1200.0;
    write_profile_csv(wd / "model.csv", 100.0, 25000.0, 200.0,
                      [&](double z) { return cn2::generalized_hv_cn2(z, truth); });
    REQUIRE(run_cli("fit " + (wd / "model.csv").string() + " --out " +
                        (wd / "fit.json").string() + " --curve " +
                        (wd / "curve.csv").string() + " --starts 4 --seed 3",
                    wd) == 0);
    auto report = json::parse(slurp(wd / "fit.json"));
    CHECK(report["params"]["A"].get<double>() == doctest::Approx(truth.A).epsilon(0.02));
    CHECK(report["params"]["C"].get<double>() == doctest::Approx(truth.C).epsilon(0.02));
    CHECK(report["params"]["H_B"].get<double>() ==
          doctest::Approx(truth.H_B).epsilon(0.02));
    CHECK(report["params"]["B"].get<double>() == truth.B);  // fixed
    CHECK(report["residual_log10_ss"].get<double>() <=
          report["initial_residual_log10_ss"].get<double>());
    CHECK(fs::exists(wd / "curve.csv"));
    CHECK(report["starts"].size() == 4);
}

TEST_CASE("thermo pairs converted measurements with the model estimate") {
    Workdir wd;
    write_sounding(wd / "sound.csv", 31000.0, 9);
    {
        std::ofstream out(wd / "thermo.csv");
        out << "altitude_m,ct2_K2m23\n";
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> u(1e-6, 1e-4);
        for (double z = 500.0; z <= 20000.0; z += 50.0) out << z << ',' << u(rng) << '\n';
    }
    REQUIRE(run_cli("thermo --thermosonde " + (wd / "thermo.csv").string() +
                        " --sounding " + (wd / "sound.csv").string() + " --dz 200 --out " +
                        (wd / "paired.csv").string(),
                    wd) == 0);
    const auto csv = slurp(wd / "paired.csv");
    CHECK(csv.rfind("bin_center_m,cn2_thermosonde_m_23,cn2_model_m_23\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') > 10);
    auto meta = json::parse(slurp(wd / "paired.csv.meta.json"));
    CHECK(meta["paired_bins"].get<int>() > 10);
}

TEST_CASE("compare bins two profiles onto one grid") {
    Workdir wd;
    write_profile_csv(wd / "a.csv", 300.0, 5000.0, 100.0, [](double) { return 2e-16; });
    write_profile_csv(wd / "b.csv", 300.0, 5000.0, 100.0, [](double) { return 1e-16; });
    REQUIRE(run_cli("compare " + (wd / "a.csv").string() + " " + (wd / "b.csv").string() +
                        " --dz 500 --out " + (wd / "cmp.csv").string(),
                    wd) == 0);
    std::istringstream in(slurp(wd / "cmp.csv"));
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "bin_center_m,cn2_a_m_23,cn2_b_m_23,ratio_a_over_b");
    std::getline(in, row);
    CHECK(row.substr(row.rfind(',') + 1) == "2");
}

TEST_CASE("config file feeds defaults, flags override") {
    Workdir wd;
    write_sounding(wd / "a.csv", 31000.0, 12);
    std::ofstream(wd / "run.ini") << "[compute]\ndz=200\nomega=1\n";
    REQUIRE(run_cli("--config " + (wd / "run.ini").string() + " compute " +
                        (wd / "a.csv").string() + " --out " + (wd / "o1").string(),
                    wd) == 0);
    auto s1 = json::parse(slurp(wd / "o1" / "summary.json"));
    CHECK(s1["config"]["dz_m"] == 200.0);
    CHECK(s1["config"]["omega"] == 1);

    REQUIRE(run_cli("--config " + (wd / "run.ini").string() + " compute " +
                        (wd / "a.csv").string() + " --out " + (wd / "o2").string() +
                        " --dz 400",
                    wd) == 0);
    auto s2 = json::parse(slurp(wd / "o2" / "summary.json"));
    CHECK(s2["config"]["dz_m"] == 400.0);
    CHECK(s2["config"]["omega"] == 1);
}
