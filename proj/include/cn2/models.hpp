#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cn2/estimator.hpp"

namespace cn2 {

/// Hufnagel-Valley profile parameters.
struct HVParams {
    double wind_rms_ms = 21.0;     // rms high-altitude wind speed [m/s]
    double ground_cn2 = 1.7e-14;   // Cn2 near the ground [m^(-2/3)]
};

/// The standard HV-5/7 parameter set (w = 21 m/s, A = 1.7e-14).
HVParams hv57();

/// Hufnagel-Valley Cn2 at altitude z above sea level [m]:
///   0.00594 (w/27)^2 (z/1e5)^10 exp(-z/1000)
///   + 2.7e-16 exp(-z/1500) + A exp(-z/100).
double hv_cn2(double z_m, const HVParams& params);

/// One isolated Gaussian turbulence layer of the generalized model.
struct GaussianLayer {
    double magnitude = 0.0;    // E [m^(-2/3)]
    double center_m = 0.0;     // H_E
    double thickness_m = 1.0;  // e
};

/// Generalized Hufnagel-Valley coefficients: surface term A, troposphere
/// term B, tropopause power term C, tropopause Gaussian D, plus optional
/// extra Gaussian layers.
struct GeneralizedHVParams {
    double A = 0.0;            // m^(-2/3), exp(-z/H_A)
    double B = 0.0;            // m^(-2/3), exp(-z/H_B)
    double C = 0.0;            // m^(-2/3), (z/1e5)^10 exp(-z/H_C)
    double D = 0.0;            // m^(-2/3), Gaussian at H_D with width d
    double H_A = 100.0;        // m
    double H_B = 1500.0;       // m
    double H_C = 1000.0;       // m
    double H_D = 12000.0;      // m
    double d = 1200.0;         // m
    std::vector<GaussianLayer> layers;

    void validate() const;
};

/// Which parameters the fit may move. Defaults follow the usual practice
/// of fixing the troposphere magnitude, the surface scale height and the
/// layer geometry, leaving magnitudes and mid-level scale heights free.
struct GeneralizedHVMask {
    bool A = true;
    bool B = false;
    bool C = true;
    bool D = true;
    bool H_A = false;
    bool H_B = true;
    bool H_C = true;
    bool H_D = false;
    bool d = false;
    bool layer_magnitudes = true;  // E free, center/thickness fixed
};

double generalized_hv_cn2(double z_m, const GeneralizedHVParams& params);

/// Altitude band used for scale-factor calibration [m].
struct CalibrationBand {
    double z_low_m = 1000.0;
    double z_high_m = 4000.0;
};

struct CalibrationResult {
    double scale_factor = 1.0;
    double residual_log10_rms = 0.0;  // after applying the factor
    std::size_t used_levels = 0;
    std::size_t excluded_nonpositive = 0;
};

/// Closed-form log-space multiplier aligning a profile with a reference
/// model on the band: c = 10^mean(log10 ref(z + elevation) - log10 cn2(z)).
/// Non-positive profile values inside the band are excluded and counted.
CalibrationResult calibrate_scale_factor(const Cn2Profile& profile,
                                         const std::function<double(double)>& reference,
                                         const CalibrationBand& band = {},
                                         double station_elevation_m = 0.0);

struct FitOptions {
    std::size_t starts = 8;       // multi-start count, deterministic seeds
    std::uint64_t seed = 0;
    std::size_t max_iterations = 6000;
    double station_elevation_m = 0.0;
    double magnitude_low = 1e-20;   // bounds for free magnitudes
    double magnitude_high = 1e-1;
    double height_low = 200.0;      // bounds for free scale heights [m]
    double height_high = 30000.0;
};

struct FitStartRecord {
    std::size_t start = 0;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

struct FitResult {
    GeneralizedHVParams params;
    double residual = 0.0;           // sum of squared log10 residuals
    double initial_residual = 0.0;
    std::size_t used_levels = 0;
    std::size_t excluded_nonpositive = 0;
    std::vector<FitStartRecord> starts;
};

/// Least-squares fit of the generalized model to a Cn2 profile in log10
/// space. Free magnitudes and scale heights are optimized in log space
/// (positivity by construction) with a bounded Nelder-Mead started from
/// `init` plus seeded perturbations; the best start wins, ties broken by
/// start index. Throws NumericalError when no start converges.
FitResult fit_generalized_hv(const Cn2Profile& profile,
                             const GeneralizedHVParams& init,
                             const GeneralizedHVMask& mask = {},
                             const FitOptions& options = {});

} // namespace cn2
