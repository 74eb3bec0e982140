#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cn2/profile_prep.hpp"

namespace cn2 {

/// Tunables of the structure-function estimator.
struct EstimatorConfig {
    double dz_m = 100.0;                  // resampling grid spacing
    std::size_t window_half_width = 2;    // local-mean window is 2w+1 points
    std::size_t separation_steps = 1;     // estimator spacing in grid steps
    double scale_factor = 1.0;            // empirical calibration multiplier
    std::optional<double> wavelength_um;  // dispersive index when set

    double separation_m() const {
        return static_cast<double>(separation_steps) * dz_m;
    }
    bool operator==(const EstimatorConfig&) const = default;
};

/// Estimated Cn2 versus altitude, with the configuration that produced it.
struct Cn2Profile {
    std::vector<double> altitude_m;  // aligned to the dz lattice
    std::vector<double> cn2;         // m^(-2/3), non-negative
    EstimatorConfig config;
    std::string provenance;

    std::size_t size() const { return cn2.size(); }
};

/// Empirical structure function: the spatial average of squared
/// fluctuation differences at each requested separation. Separations
/// must be positive multiples of the grid spacing inside the valid span.
std::vector<std::pair<double, double>>
empirical_structure_function(const FluctuationProfile& fluct,
                             std::span<const double> separations_m);

/// Structure-function Cn2 estimate. At each interior grid point the three
/// pairwise squared differences among {n1[i-m], n1[i], n1[i+m]} are each
/// normalized by their separation to the 2/3 power (the outer pair by
/// (2*delta)^(2/3)), averaged, and scaled by the calibration factor.
Cn2Profile estimate_cn2(const FluctuationProfile& fluct, const EstimatorConfig& config,
                        const std::string& provenance = {});

/// Per-altitude arithmetic mean of many profiles sharing one grid and
/// configuration. Levels present in fewer than `min_fraction` of the
/// inputs are dropped.
Cn2Profile average_profiles(std::span<const Cn2Profile> profiles,
                            double min_fraction = 0.8);

/// Groups (z, value) samples into [k*dz, (k+1)*dz) altitude bins and
/// averages each non-empty bin. Returns (bin center, mean) pairs.
std::vector<std::pair<double, double>>
bin_average(std::span<const std::pair<double, double>> samples, double dz_m);

} // namespace cn2
