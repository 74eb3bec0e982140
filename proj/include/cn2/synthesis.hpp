#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "cn2/estimator.hpp"

namespace cn2 {

/// Von Karman spectrum parameters. The inner scale is carried for
/// bookkeeping; the spectral shape uses only cn2 and the outer scale.
struct VonKarmanParams {
    double cn2 = 1e-16;          // m^(-2/3)
    double outer_scale_m = 100.0;
    double inner_scale_m = 1e-3;

    double kappa0() const { return 1.0 / outer_scale_m; }
    void validate() const;
};

/// 3-D power spectrum: 0.033 cn2 / (kappa^2 + kappa0^2)^(11/6).
double spectrum_3d(double kappa, const VonKarmanParams& params);

/// 1-D (transect) power spectrum, the closed form of
/// 2*pi * integral_kappa^inf k' Phi_n(k') dk':
///   (6*pi/5) * 0.033 * cn2 * (kappa^2 + kappa0^2)^(-5/6).
double spectrum_1d(double kappa, const VonKarmanParams& params);

/// Total field variance, the closed form of 2 * integral_0^inf V_n dk.
double von_karman_variance(const VonKarmanParams& params);

struct QuadratureOptions {
    double rel_tol = 1e-4;
    std::size_t max_segments = 1u << 20;
};

/// Structure function from a 3-D spectrum:
///   D(rho) = 8*pi * integral_0^inf k^2 Phi(k) (1 - sin(k rho)/(k rho)) dk.
/// The integral is summed over half-period segments of the oscillation
/// with adaptive Gauss-Kronrod inside each; above the working cutoff the
/// spectrum is extrapolated as the locally-fitted power law and the
/// remaining tail added in closed form. Throws NumericalError when the
/// tail does not decay fast enough to converge.
double theoretical_structure_function(double rho_m,
                                      const std::function<double(double)>& spectrum,
                                      const QuadratureOptions& options = {});

/// One synthesized realization of 1-D refractive-index fluctuations.
struct SyntheticField {
    double dz_m = 0.0;
    std::vector<double> n1;
    double n0 = 0.0;            // constant mean to add for pipeline runs
    VonKarmanParams params;
    std::uint64_t seed = 0;
    double band_variance = 0.0; // discrete spectral integral the field targets

    /// n0 + n1 with `guard_fraction` of the samples dropped at each end
    /// (spectral synthesis is periodic; ends are wrap-correlated).
    std::vector<double> total_index(double guard_fraction = 0.1) const;
};

struct SynthesisOptions {
    double mean_n0 = 1.0003;
    /// Aliases of the 1-D spectrum folded into the resolved band. The
    /// sampled sequence then carries the continuum statistics at grid
    /// lags instead of the band-limited ones; the residual tail is added
    /// as a flat floor so the variance budget is exact.
    std::size_t alias_terms = 32;
};

/// White-noise coloring on a periodic grid of `count` samples (a power of
/// two): seeded Gaussian noise, FFT, multiplication by H = sqrt(V_d * 2pi/dz)
/// with V_d the alias-folded 1-D spectrum, inverse FFT. With this
/// normalization the expected periodogram equals V_d on the resolved band
/// and the expected sample variance equals sum(V_d) * dkappa (stored as
/// `band_variance`).
SyntheticField synthesize_fluctuations(std::size_t count, double dz_m,
                                       const VonKarmanParams& params,
                                       std::uint64_t seed,
                                       const SynthesisOptions& options = {});

struct StudyConfig {
    std::vector<double> dz_list;
    std::vector<double> outer_scale_list;
    std::vector<std::size_t> window_list = {2};
    std::vector<std::size_t> separation_steps_list = {1};
    std::size_t trials = 8;
    std::uint64_t seed = 0;
    double cn2 = 1e-16;
    std::size_t samples = 1u << 15;  // field length per trial (power of two)
    double guard_fraction = 0.1;
    unsigned threads = 0;            // 0 = hardware/env default
};

struct StudyRow {
    double dz_m = 0.0;
    double outer_scale_m = 0.0;
    std::size_t window_half_width = 0;
    std::size_t separation_steps = 0;
    std::size_t trials = 0;
    double ratio_mean = 0.0;  // estimated / true cn2
    double ratio_std = 0.0;
};

/// Runs the full estimation pipeline with unit scale factor on synthetic
/// fields and reports the estimated/true cn2 ratio per parameter cell.
/// Fields are shared across window/separation settings within one
/// (dz, L0) cell; trial sub-seeds derive deterministically from the master
/// seed, so results do not depend on the execution schedule.
std::vector<StudyRow> scale_factor_study(const StudyConfig& config);

/// Study table in CSV form: dz_m,L0_m,omega,m,trials,ratio_mean,ratio_std.
void serialize_study_csv(std::span<const StudyRow> rows, std::ostream& out);

/// Field dump in CSV form: z_m,n1.
void serialize_field_csv(const SyntheticField& field, std::ostream& out);

} // namespace cn2
