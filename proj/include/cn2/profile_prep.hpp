#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cn2/sounding.hpp"

namespace cn2 {

/// Optical refractive index from pressure [hPa] and temperature [K].
/// With a wavelength [um] the dispersive form
///   n = 1 + 77.6e-6 (1 + 7.52e-3 lambda^-2) p/T
/// is used; without one the broadband approximation n = 1 + 79e-6 p/T.
double refractive_index(double pressure_hpa, double temperature_k,
                        std::optional<double> wavelength_um = std::nullopt);

/// Profile on an equispaced altitude grid z0 + i*dz.
struct UniformProfile {
    double z0_m = 0.0;
    double dz_m = 0.0;
    std::vector<double> n;               // refractive index per grid point
    std::vector<double> pressure_hpa;    // co-resampled, may be empty
    std::vector<double> temperature_k;   // co-resampled, may be empty

    std::size_t size() const { return n.size(); }
    double altitude_m(std::size_t i) const { return z0_m + static_cast<double>(i) * dz_m; }
};

/// Index interval [begin, end) of usable samples.
struct ValidRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end > begin ? end - begin : 0; }
};

/// Refractive-index fluctuations around a sliding local mean.
struct FluctuationProfile {
    double z0_m = 0.0;
    double dz_m = 0.0;
    std::vector<double> n1;         // full-length; defined on valid range
    std::vector<double> local_mean; // the window mean that was removed
    std::size_t window_half_width = 0;
    ValidRange valid;

    double altitude_m(std::size_t i) const { return z0_m + static_cast<double>(i) * dz_m; }
};

/// Resamples pressure and temperature onto a uniform grid by linear
/// interpolation in altitude, then computes the refractive index per
/// grid point. The grid starts at z_start (default: first measured
/// altitude rounded up to a multiple of dz) and never extrapolates past
/// the measured range.
UniformProfile resample_profile(const SoundingProfile& profile, double dz_m,
                                std::optional<double> z_start_m = std::nullopt,
                                std::optional<double> wavelength_um = std::nullopt);

/// Centered moving average of width 2*half_width+1. Entries closer than
/// half_width to either end are not computable; `valid` marks the interior.
/// The returned vector has the input length with edge entries left at 0.
std::vector<double> window_mean(const std::vector<double>& series,
                                std::size_t half_width, ValidRange& valid);

/// Removes the sliding window mean: n1[i] = n[i] - mean(n[i-w..i+w]).
FluctuationProfile extract_fluctuations(const UniformProfile& profile,
                                        std::size_t window_half_width);

/// Grid + fluctuation series variant used by synthetic pipelines.
FluctuationProfile extract_fluctuations(const std::vector<double>& n, double z0_m,
                                        double dz_m, std::size_t window_half_width);

/// Debug dump: z_m,n per grid point.
void serialize_uniform_csv(const UniformProfile& profile, std::ostream& out);

} // namespace cn2
