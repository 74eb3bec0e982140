#include "cn2/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cn2/errors.hpp"

namespace cn2 {

namespace {

std::size_t separation_to_steps(double rho_m, double dz_m) {
    const double steps = rho_m / dz_m;
    const double rounded = std::round(steps);
    if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps))
        throw ConfigError("separation " + std::to_string(rho_m) +
                          " m is not a positive multiple of dz=" +
                          std::to_string(dz_m) + " m");
    return static_cast<std::size_t>(rounded);
}

} // namespace

std::vector<std::pair<double, double>>
empirical_structure_function(const FluctuationProfile& fluct,
                             std::span<const double> separations_m) {
    std::vector<std::pair<double, double>> out;
    out.reserve(separations_m.size());
    const auto& n1 = fluct.n1;
    for (double rho : separations_m) {
        const std::size_t lag = separation_to_steps(rho, fluct.dz_m);
        if (fluct.valid.size() <= lag)
            throw InsufficientDataError("separation " + std::to_string(rho) +
                                        " m exceeds the valid fluctuation span");
        double sum = 0.0;
        const std::size_t last = fluct.valid.end - lag;
        for (std::size_t i = fluct.valid.begin; i < last; ++i) {
            const double d = n1[i + lag] - n1[i];
            sum += d * d;
        }
        out.emplace_back(rho, sum / static_cast<double>(last - fluct.valid.begin));
    }
    return out;
}

Cn2Profile estimate_cn2(const FluctuationProfile& fluct, const EstimatorConfig& config,
                        const std::string& provenance) {
    if (config.scale_factor <= 0.0) throw ConfigError("scale factor must be positive");
    if (config.separation_steps == 0) throw ConfigError("separation steps must be positive");
    if (config.window_half_width != fluct.window_half_width)
        throw ConfigError("estimator window half-width does not match the "
                          "fluctuation profile");
    if (config.dz_m != fluct.dz_m)
        throw ConfigError("estimator dz does not match the fluctuation grid");

    const std::size_t m = config.separation_steps;
    if (fluct.valid.size() < 2 * m + 1)
        throw InsufficientDataError("valid fluctuation range of " +
                                    std::to_string(fluct.valid.size()) +
                                    " points cannot host a 3-point estimate at m=" +
                                    std::to_string(m));

    const double delta = config.separation_m();
    const double norm_inner = std::pow(delta, 2.0 / 3.0);
    const double norm_outer = std::pow(2.0 * delta, 2.0 / 3.0);

    Cn2Profile out;
    out.config = config;
    out.provenance = provenance;
    const std::size_t first = fluct.valid.begin + m;
    const std::size_t last = fluct.valid.end - m;  // exclusive
    out.altitude_m.reserve(last - first);
    out.cn2.reserve(last - first);
    const auto& n1 = fluct.n1;
    for (std::size_t i = first; i < last; ++i) {
        const double lo = n1[i - m];
        const double mid = n1[i];
        const double hi = n1[i + m];
        const double d_lo = (mid - lo) * (mid - lo) / norm_inner;
        const double d_hi = (hi - mid) * (hi - mid) / norm_inner;
        const double d_out = (hi - lo) * (hi - lo) / norm_outer;
        out.altitude_m.push_back(fluct.altitude_m(i));
        out.cn2.push_back(config.scale_factor * (d_lo + d_hi + d_out) / 3.0);
    }
    return out;
}

Cn2Profile average_profiles(std::span<const Cn2Profile> profiles, double min_fraction) {
    if (profiles.empty())
        throw InsufficientDataError("no profiles to average");
    if (min_fraction <= 0.0 || min_fraction > 1.0)
        throw ConfigError("min_fraction must lie in (0, 1]");

    const EstimatorConfig& config = profiles.front().config;
    const double dz = config.dz_m;
    for (const auto& p : profiles) {
        if (!(p.config == config))
            throw ConfigError("profiles were produced with different configurations");
    }

    struct Accum {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::map<long long, Accum> levels;
    for (const auto& p : profiles) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double steps = p.altitude_m[i] / dz;
            const double rounded = std::round(steps);
            if (std::abs(steps - rounded) > 1e-6)
                throw ConfigError("profile altitude " + std::to_string(p.altitude_m[i]) +
                                  " m is not aligned to the dz lattice");
            auto& acc = levels[static_cast<long long>(rounded)];
            acc.sum += p.cn2[i];
            acc.count += 1;
        }
    }

    const auto needed = static_cast<std::size_t>(
        std::ceil(min_fraction * static_cast<double>(profiles.size())));
    Cn2Profile out;
    out.config = config;
    out.provenance = "average(" + std::to_string(profiles.size()) + " profiles)";
    for (const auto& [key, acc] : levels) {
        if (acc.count < needed) continue;
        out.altitude_m.push_back(static_cast<double>(key) * dz);
        out.cn2.push_back(acc.sum / static_cast<double>(acc.count));
    }
    if (out.cn2.empty())
        throw InsufficientDataError("no level present in the required fraction of profiles");
    return out;
}

std::vector<std::pair<double, double>>
bin_average(std::span<const std::pair<double, double>> samples, double dz_m) {
    if (dz_m <= 0.0) throw ConfigError("bin width must be positive");
    if (samples.empty()) throw InsufficientDataError("nothing to bin");
    std::map<long long, std::pair<double, std::size_t>> bins;
    for (const auto& [z, v] : samples) {
        const auto k = static_cast<long long>(std::floor(z / dz_m));
        auto& b = bins[k];
        b.first += v;
        b.second += 1;
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(bins.size());
    for (const auto& [k, b] : bins)
        out.emplace_back((static_cast<double>(k) + 0.5) * dz_m,
                         b.first / static_cast<double>(b.second));
    return out;
}

} // namespace cn2
