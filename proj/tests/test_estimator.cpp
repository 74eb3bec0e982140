#include <doctest.h>

#include <cmath>
#include <random>

#include "cn2/errors.hpp"
#include "cn2/estimator.hpp"
#include "cn2/synthesis.hpp"

using namespace cn2;

namespace {

FluctuationProfile make_fluct(std::vector<double> n1, double dz, std::size_t w = 1) {
    FluctuationProfile f;
    f.z0_m = 0.0;
    f.dz_m = dz;
    f.window_half_width = w;
    f.valid = {0, n1.size()};
    f.n1 = std::move(n1);
    return f;
}

EstimatorConfig config_for(const FluctuationProfile& f, std::size_t m = 1,
                           double c = 1.0) {
    EstimatorConfig cfg;
    cfg.dz_m = f.dz_m;
    cfg.window_half_width = f.window_half_width;
    cfg.separation_steps = m;
    cfg.scale_factor = c;
    return cfg;
}

} // namespace

TEST_CASE("structure function of a zero field is zero") {
    auto f = make_fluct(std::vector<double>(64, 0.0), 10.0);
    const double seps[] = {10.0, 20.0, 50.0};
    for (auto [rho, d] : empirical_structure_function(f, seps)) CHECK(d == 0.0);
}

TEST_CASE("structure function of an alternating field is 4a^2 at one step") {
    const double a = 3e-8;
    std::vector<double> n1(100);
    for (std::size_t i = 0; i < n1.size(); ++i) n1[i] = (i % 2 == 0) ? a : -a;
    auto f = make_fluct(std::move(n1), 5.0);
    const double seps[] = {5.0};
    auto d = empirical_structure_function(f, seps);
    CHECK(d[0].second == doctest::Approx(4.0 * a * a).epsilon(1e-12));
}

TEST_CASE("structure function rejects misaligned separations") {
    auto f = make_fluct(std::vector<double>(64, 0.0), 10.0);
    const double seps[] = {15.0};
    CHECK_THROWS_AS(empirical_structure_function(f, seps), ConfigError);
}

TEST_CASE("estimator returns zero for zero fluctuations") {
    auto f = make_fluct(std::vector<double>(64, 0.0), 10.0);
    auto p = estimate_cn2(f, config_for(f));
    REQUIRE(p.size() > 0);
    for (double v : p.cn2) CHECK(v == 0.0);
}

TEST_CASE("doubling fluctuations quadruples the estimate") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 1e-8);
    std::vector<double> n1(256);
    for (auto& v : n1) v = g(rng);
    auto f1 = make_fluct(n1, 25.0);
    for (auto& v : n1) v *= 2.0;
    auto f2 = make_fluct(n1, 25.0);
    auto p1 = estimate_cn2(f1, config_for(f1));
    auto p2 = estimate_cn2(f2, config_for(f2));
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i)
        CHECK(p2.cn2[i] == doctest::Approx(4.0 * p1.cn2[i]).epsilon(1e-12));
}

TEST_CASE("scale factor multiplies the estimate linearly") {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> g(0.0, 1e-8);
    std::vector<double> n1(128);
    for (auto& v : n1) v = g(rng);
    auto f = make_fluct(n1, 25.0);
    auto p1 = estimate_cn2(f, config_for(f, 1, 1.0));
    auto p50 = estimate_cn2(f, config_for(f, 1, 50.0));
    for (std::size_t i = 0; i < p1.size(); ++i)
        CHECK(p50.cn2[i] == doctest::Approx(50.0 * p1.cn2[i]).epsilon(1e-13));
}

TEST_CASE("estimates are non-negative for random fluctuation profiles") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1e-7);
    std::uniform_int_distribution<std::size_t> len(16, 200);
    std::uniform_int_distribution<std::size_t> msel(1, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> n1(len(rng));
        for (auto& v : n1) v = g(rng);
        auto f = make_fluct(std::move(n1), 10.0);
        const std::size_t m = msel(rng);
        if (f.valid.size() < 2 * m + 1) continue;
        auto p = estimate_cn2(f, config_for(f, m));
        for (double v : p.cn2) CHECK(v >= 0.0);
    }
}

TEST_CASE("first estimate sits one separation above the valid-range start") {
    UniformProfile u;
    u.z0_m = 100.0;
    u.dz_m = 50.0;
    u.n.resize(64);
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> jitter(0.0, 1e-7);
    for (auto& v : u.n) v = 1.0003 + jitter(rng);
    const std::size_t w = 2, m = 1;
    auto f = extract_fluctuations(u, w);
    auto cfg = config_for(f, m);
    auto p = estimate_cn2(f, cfg);
    const double expected = u.z0_m + (static_cast<double>(w + m)) * u.dz_m;
    CHECK(p.altitude_m.front() == expected);
    CHECK(p.altitude_m.front() - u.z0_m >=
          cfg.separation_m() + static_cast<double>(w) * u.dz_m);
}

TEST_CASE("estimator mean matches the structure-function combination") {
    std::mt19937_64 rng(25);
    std::normal_distribution<double> g(0.0, 1e-8);
    std::vector<double> n1(20000);
    for (auto& v : n1) v = g(rng);
    const double dz = 10.0;
    auto f = make_fluct(std::move(n1), dz);
    const std::size_t m = 2;
    auto p = estimate_cn2(f, config_for(f, m));
    double est_mean = 0.0;
    for (double v : p.cn2) est_mean += v;
    est_mean /= static_cast<double>(p.size());

    const double delta = static_cast<double>(m) * dz;
    const double seps[] = {delta, 2.0 * delta};
    auto d = empirical_structure_function(f, seps);
    const double combo = (2.0 * d[0].second / std::pow(delta, 2.0 / 3.0) +
                          d[1].second / std::pow(2.0 * delta, 2.0 / 3.0)) /
                         3.0;
    CHECK(est_mean == doctest::Approx(combo).epsilon(5e-3));
}

TEST_CASE("estimator propagates insufficient valid range") {
    auto f = make_fluct(std::vector<double>(4, 1e-8), 10.0);
    CHECK_THROWS_AS(estimate_cn2(f, config_for(f, 2)), InsufficientDataError);
}

TEST_CASE("synthetic field with unit scale factor lands a bit below truth") {
    VonKarmanParams params;
    params.cn2 = 1e-16;
    params.outer_scale_m = 100.0;
    auto field = synthesize_fluctuations(1u << 16, 1.0, params, 20240915ull);
    auto n = field.total_index();
    auto f = extract_fluctuations(n, 0.0, 1.0, 2);
    EstimatorConfig cfg;
    cfg.dz_m = 1.0;
    cfg.window_half_width = 2;
    cfg.separation_steps = 1;
    auto p = estimate_cn2(f, cfg);
    double mean = 0.0;
    for (double v : p.cn2) mean += v;
    mean /= static_cast<double>(p.size());
    CHECK(mean / params.cn2 > 0.6);
    CHECK(mean / params.cn2 < 1.0);
}

TEST_CASE("fluctuation extraction underestimates synthetic variance") {
    VonKarmanParams params;
    params.cn2 = 1e-16;
    params.outer_scale_m = 100.0;
    auto field = synthesize_fluctuations(1u << 16, 1.0, params, 77ull);
    auto n = field.total_index();
    auto f = extract_fluctuations(n, 0.0, 1.0, 2);
    const std::size_t guard = field.n1.size() / 10;
    double var_true = 0.0;
    for (std::size_t i = guard; i < field.n1.size() - guard; ++i)
        var_true += field.n1[i] * field.n1[i];
    var_true /= static_cast<double>(field.n1.size() - 2 * guard);
    double var_est = 0.0;
    for (std::size_t i = f.valid.begin; i < f.valid.end; ++i)
        var_est += f.n1[i] * f.n1[i];
    var_est /= static_cast<double>(f.valid.size());
    CHECK(var_est < var_true);
}

TEST_CASE("a temperature-lapse kink shows up as an elevated layer") {
    // a sharp change in the lapse rate (tropopause-like) leaves residual
    // structure after the window mean, so the estimate peaks near the kink
    SoundingProfile sounding;
    std::mt19937_64 rng(26);
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (double z = 0.0; z <= 20000.0; z += 10.0) {
        const double p = 1013.25 * std::exp(-z / 8000.0);
        const double t = (z < 11000.0 ? 288.15 - 0.0065 * z : 216.65) + jitter(rng);
        sounding.levels.push_back({z, p, t});
    }
    auto uniform = resample_profile(sounding, 100.0);
    auto fluct = extract_fluctuations(uniform, 2);
    EstimatorConfig cfg;
    cfg.dz_m = 100.0;
    cfg.window_half_width = 2;
    auto profile = estimate_cn2(fluct, cfg);

    auto band_mean = [&](double lo, double hi) {
        double acc = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < profile.size(); ++i)
            if (profile.altitude_m[i] >= lo && profile.altitude_m[i] <= hi) {
                acc += profile.cn2[i];
                ++count;
            }
        return acc / static_cast<double>(count);
    };
    CHECK(band_mean(10500.0, 11500.0) > 3.0 * band_mean(7000.0, 9000.0));
}

TEST_CASE("average of one profile is that profile") {
    Cn2Profile p;
    p.config.dz_m = 100.0;
    p.altitude_m = {300.0, 400.0, 500.0};
    p.cn2 = {1e-16, 2e-16, 3e-16};
    auto avg = average_profiles(std::vector<Cn2Profile>{p});
    CHECK(avg.altitude_m == p.altitude_m);
    CHECK(avg.cn2 == p.cn2);
}

TEST_CASE("average of P and 3P is 2P per level") {
    Cn2Profile p;
    p.config.dz_m = 100.0;
    p.altitude_m = {300.0, 400.0, 500.0};
    p.cn2 = {1e-16, 2e-16, 3e-16};
    Cn2Profile q = p;
    for (auto& v : q.cn2) v *= 3.0;
    auto avg = average_profiles(std::vector<Cn2Profile>{p, q});
    REQUIRE(avg.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(avg.cn2[i] == doctest::Approx(2.0 * p.cn2[i]).epsilon(1e-15));
}

TEST_CASE("averaging drops levels present in too few profiles") {
    Cn2Profile a, b, c;
    for (auto* p : {&a, &b, &c}) p->config.dz_m = 100.0;
    a.altitude_m = {300.0, 400.0, 500.0};
    a.cn2 = {1.0, 1.0, 1.0};
    b.altitude_m = {300.0, 400.0};
    b.cn2 = {2.0, 2.0};
    c.altitude_m = {300.0, 400.0};
    c.cn2 = {3.0, 3.0};
    auto avg = average_profiles(std::vector<Cn2Profile>{a, b, c}, 0.8);
    REQUIRE(avg.size() == 2);  // 500 m present in 1/3 < 80%
    CHECK(avg.altitude_m.back() == 400.0);
    CHECK(avg.cn2.front() == doctest::Approx(2.0));
}

TEST_CASE("averaging rejects mismatched grids and configs") {
    Cn2Profile p, q;
    p.config.dz_m = 100.0;
    q.config.dz_m = 200.0;
    p.altitude_m = {300.0};
    p.cn2 = {1.0};
    q.altitude_m = {300.0};
    q.cn2 = {1.0};
    CHECK_THROWS_AS(average_profiles(std::vector<Cn2Profile>{p, q}), ConfigError);

    q.config.dz_m = 100.0;
    q.altitude_m = {342.0};  // off the lattice
    CHECK_THROWS_AS(average_profiles(std::vector<Cn2Profile>{p, q}), ConfigError);
}

TEST_CASE("bin average groups by altitude bins") {
    using Sample = std::pair<double, double>;
    std::vector<Sample> single{{123.0, 7.0}};
    auto b1 = bin_average(single, 200.0);
    REQUIRE(b1.size() == 1);
    CHECK(b1[0].first == doctest::Approx(100.0));
    CHECK(b1[0].second == 7.0);

    std::vector<Sample> pair_in_bin{{110.0, 4.0}, {130.0, 8.0}, {450.0, 1.0}};
    auto b2 = bin_average(pair_in_bin, 200.0);
    REQUIRE(b2.size() == 2);
    CHECK(b2[0].second == doctest::Approx(6.0));
    CHECK(b2[1].first == doctest::Approx(500.0));  // empty bins omitted
}
