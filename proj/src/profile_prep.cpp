#include "cn2/profile_prep.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cn2/csv.hpp"
#include "cn2/errors.hpp"

namespace cn2 {

double refractive_index(double pressure_hpa, double temperature_k,
                        std::optional<double> wavelength_um) {
    if (pressure_hpa < 0.0) throw ValidationError("pressure must be non-negative");
    if (temperature_k <= 0.0) throw ValidationError("temperature must be positive");
    if (wavelength_um) {
        if (*wavelength_um <= 0.0) throw ValidationError("wavelength must be positive");
        const double lam2 = *wavelength_um * *wavelength_um;
        return 1.0 + 77.6e-6 * (1.0 + 7.52e-3 / lam2) * pressure_hpa / temperature_k;
    }
    return 1.0 + 79e-6 * pressure_hpa / temperature_k;
}

UniformProfile resample_profile(const SoundingProfile& profile, double dz_m,
                                std::optional<double> z_start_m,
                                std::optional<double> wavelength_um) {
    if (dz_m <= 0.0) throw ConfigError("dz must be positive");
    const auto& levels = profile.levels;
    if (levels.size() < 2)
        throw InsufficientDataError("resampling needs at least 2 levels");
    const double z_min = levels.front().altitude_m;
    const double z_max = levels.back().altitude_m;
    if (z_max - z_min < 2.0 * dz_m)
        throw InsufficientDataError("sounding spans " + std::to_string(z_max - z_min) +
                                    " m, need at least 2*dz");

    double z0 = z_start_m ? *z_start_m : std::ceil(z_min / dz_m) * dz_m;
    if (z0 < z_min)
        throw ValidationError("z_start below first measured altitude");
    if (z0 > z_max - dz_m)
        throw InsufficientDataError("z_start leaves less than one grid step of data");

    const auto count = static_cast<std::size_t>(std::floor((z_max - z0) / dz_m)) + 1;

    UniformProfile out;
    out.z0_m = z0;
    out.dz_m = dz_m;
    out.n.reserve(count);
    out.pressure_hpa.reserve(count);
    out.temperature_k.reserve(count);

    std::size_t seg = 0;  // levels[seg].altitude <= z < levels[seg+1].altitude
    for (std::size_t i = 0; i < count; ++i) {
        const double z = z0 + static_cast<double>(i) * dz_m;
        while (seg + 2 < levels.size() && levels[seg + 1].altitude_m <= z) ++seg;
        const auto& lo = levels[seg];
        const auto& hi = levels[seg + 1];
        double p, t;
        if (z == hi.altitude_m) {  // exact knot hit, no arithmetic
            p = hi.pressure_hpa;
            t = hi.temperature_k;
        } else {
            const double f = (z - lo.altitude_m) / (hi.altitude_m - lo.altitude_m);
            p = lo.pressure_hpa + f * (hi.pressure_hpa - lo.pressure_hpa);
            t = lo.temperature_k + f * (hi.temperature_k - lo.temperature_k);
        }
        const double n = refractive_index(p, t, wavelength_um);
        if (n <= 1.0 || n >= 1.001)
            throw ValidationError("refractive index " + std::to_string(n) +
                                  " at z=" + std::to_string(z) +
                                  " m outside (1, 1.001)");
        out.pressure_hpa.push_back(p);
        out.temperature_k.push_back(t);
        out.n.push_back(n);
    }
    return out;
}

std::vector<double> window_mean(const std::vector<double>& series,
                                std::size_t half_width, ValidRange& valid) {
    const std::size_t w = half_width;
    const std::size_t len = 2 * w + 1;
    if (series.size() < len)
        throw InsufficientDataError("series of length " + std::to_string(series.size()) +
                                    " too short for window of " + std::to_string(len));
    std::vector<double> out(series.size(), 0.0);
    valid.begin = w;
    valid.end = series.size() - w;
    // Direct per-point summation keeps roundoff independent of series length.
    for (std::size_t i = valid.begin; i < valid.end; ++i) {
        double sum = 0.0;
        for (std::size_t j = i - w; j <= i + w; ++j) sum += series[j];
        out[i] = sum / static_cast<double>(len);
    }
    return out;
}

FluctuationProfile extract_fluctuations(const std::vector<double>& n, double z0_m,
                                        double dz_m, std::size_t window_half_width) {
    if (window_half_width == 0)
        throw ConfigError("window half-width must be positive");
    FluctuationProfile out;
    out.z0_m = z0_m;
    out.dz_m = dz_m;
    out.window_half_width = window_half_width;
    out.local_mean = window_mean(n, window_half_width, out.valid);
    out.n1.assign(n.size(), 0.0);
    for (std::size_t i = out.valid.begin; i < out.valid.end; ++i)
        out.n1[i] = n[i] - out.local_mean[i];
    return out;
}

FluctuationProfile extract_fluctuations(const UniformProfile& profile,
                                        std::size_t window_half_width) {
    return extract_fluctuations(profile.n, profile.z0_m, profile.dz_m,
                                window_half_width);
}

void serialize_uniform_csv(const UniformProfile& profile, std::ostream& out) {
    out << "z_m,n\n";
    for (std::size_t i = 0; i < profile.size(); ++i)
        out << csv::format_double(profile.altitude_m(i)) << ','
            << csv::format_double(profile.n[i]) << '\n';
}

} // namespace cn2
