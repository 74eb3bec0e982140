#include "cn2/models.hpp"

#include <algorithm>
#include <cmath>

#include "cn2/errors.hpp"
#include "cn2/neldermead.hpp"
#include "cn2/random.hpp"

namespace cn2 {

HVParams hv57() { return {21.0, 1.7e-14}; }

double hv_cn2(double z_m, const HVParams& params) {
    if (z_m < 0.0) throw ValidationError("altitude must be non-negative");
    const double w_term = params.wind_rms_ms / 27.0;
    const double z5 = z_m / 1e5;
    return 0.00594 * w_term * w_term * std::pow(z5, 10) * std::exp(-z_m / 1000.0) +
           2.7e-16 * std::exp(-z_m / 1500.0) +
           params.ground_cn2 * std::exp(-z_m / 100.0);
}

void GeneralizedHVParams::validate() const {
    if (A < 0.0 || B < 0.0 || C < 0.0 || D < 0.0)
        throw ValidationError("magnitudes must be non-negative");
    if (H_A <= 0.0 || H_B <= 0.0 || H_C <= 0.0 || H_D <= 0.0 || d <= 0.0)
        throw ValidationError("scale heights and thicknesses must be positive");
    for (const auto& layer : layers) {
        if (layer.magnitude < 0.0)
            throw ValidationError("layer magnitude must be non-negative");
        if (layer.thickness_m <= 0.0 || layer.center_m <= 0.0)
            throw ValidationError("layer geometry must be positive");
    }
}

double generalized_hv_cn2(double z_m, const GeneralizedHVParams& p) {
    if (z_m < 0.0) throw ValidationError("altitude must be non-negative");
    const double z5 = z_m / 1e5;
    double value = p.A * std::exp(-z_m / p.H_A) + p.B * std::exp(-z_m / p.H_B) +
                   p.C * std::pow(z5, 10) * std::exp(-z_m / p.H_C);
    const double dd = z_m - p.H_D;
    value += p.D * std::exp(-dd * dd / (2.0 * p.d * p.d));
    for (const auto& layer : p.layers) {
        const double dl = z_m - layer.center_m;
        value += layer.magnitude *
                 std::exp(-dl * dl / (2.0 * layer.thickness_m * layer.thickness_m));
    }
    return value;
}

CalibrationResult calibrate_scale_factor(const Cn2Profile& profile,
                                         const std::function<double(double)>& reference,
                                         const CalibrationBand& band,
                                         double station_elevation_m) {
    if (!(band.z_high_m > band.z_low_m) || band.z_low_m < 0.0)
        throw ConfigError("calibration band must satisfy z_high > z_low >= 0");

    std::vector<double> log_ratios;
    std::size_t in_band = 0, excluded = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double z = profile.altitude_m[i];
        if (z < band.z_low_m || z > band.z_high_m) continue;
        ++in_band;
        const double value = profile.cn2[i];
        if (!(value > 0.0)) {
            ++excluded;
            continue;
        }
        const double ref = reference(z + station_elevation_m);
        if (!(ref > 0.0))
            throw ValidationError("reference model non-positive at z=" +
                                  std::to_string(z + station_elevation_m) + " m");
        log_ratios.push_back(std::log10(ref) - std::log10(value));
    }
    if (in_band < 3)
        throw InsufficientDataError("calibration band holds " + std::to_string(in_band) +
                                    " levels, need at least 3");
    if (log_ratios.empty())
        throw InsufficientDataError("all in-band levels were non-positive");

    double mean = 0.0;
    for (double r : log_ratios) mean += r;
    mean /= static_cast<double>(log_ratios.size());
    double rss = 0.0;
    for (double r : log_ratios) rss += (r - mean) * (r - mean);

    CalibrationResult result;
    result.scale_factor = std::pow(10.0, mean);
    result.residual_log10_rms = std::sqrt(rss / static_cast<double>(log_ratios.size()));
    result.used_levels = log_ratios.size();
    result.excluded_nonpositive = excluded;
    return result;
}

namespace {

/// View of the free parameters as a flat log-space vector.
struct FreeLayout {
    std::vector<double*> slots;        // into a GeneralizedHVParams copy
    std::vector<bool> is_magnitude;    // selects the bound pair
};

FreeLayout collect_free(GeneralizedHVParams& p, const GeneralizedHVMask& mask) {
    FreeLayout layout;
    auto add = [&](bool free, double* slot, bool magnitude) {
        if (!free) return;
        layout.slots.push_back(slot);
        layout.is_magnitude.push_back(magnitude);
    };
    add(mask.A, &p.A, true);
    add(mask.B, &p.B, true);
    add(mask.C, &p.C, true);
    add(mask.D, &p.D, true);
    add(mask.H_A, &p.H_A, false);
    add(mask.H_B, &p.H_B, false);
    add(mask.H_C, &p.H_C, false);
    add(mask.H_D, &p.H_D, false);
    add(mask.d, &p.d, false);
    for (auto& layer : p.layers) add(mask.layer_magnitudes, &layer.magnitude, true);
    return layout;
}

} // namespace

FitResult fit_generalized_hv(const Cn2Profile& profile,
                             const GeneralizedHVParams& init,
                             const GeneralizedHVMask& mask,
                             const FitOptions& options) {
    init.validate();
    if (options.starts == 0) throw ConfigError("fit needs at least one start");

    std::vector<double> z, log_y;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (!(profile.cn2[i] > 0.0)) {
            ++excluded;
            continue;
        }
        z.push_back(profile.altitude_m[i] + options.station_elevation_m);
        log_y.push_back(std::log10(profile.cn2[i]));
    }
    if (z.size() < 3)
        throw InsufficientDataError("fit needs at least 3 positive levels, found " +
                                    std::to_string(z.size()));

    GeneralizedHVParams work = init;
    FreeLayout layout = collect_free(work, mask);
    const std::size_t dim = layout.slots.size();
    if (dim == 0) throw ConfigError("fit mask leaves no free parameters");

    std::vector<double> x0(dim), lo(dim), hi(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const double lo_v = layout.is_magnitude[i] ? options.magnitude_low : options.height_low;
        const double hi_v = layout.is_magnitude[i] ? options.magnitude_high : options.height_high;
        lo[i] = std::log(lo_v);
        hi[i] = std::log(hi_v);
        x0[i] = std::clamp(std::log(std::max(*layout.slots[i], lo_v)), lo[i], hi[i]);
    }

    auto objective = [&](std::span<const double> x) {
        for (std::size_t i = 0; i < dim; ++i) *layout.slots[i] = std::exp(x[i]);
        double rss = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double model = generalized_hv_cn2(z[i], work);
            const double r = std::log10(model) - log_y[i];
            rss += r * r;
        }
        return rss;
    };

    FitResult result;
    result.used_levels = z.size();
    result.excluded_nonpositive = excluded;
    result.initial_residual = objective(x0);

    NelderMeadOptions nm;
    nm.max_iterations = options.max_iterations;

    bool any_converged = false;
    double best = result.initial_residual;
    std::vector<double> best_x = x0;
    for (std::size_t s = 0; s < options.starts; ++s) {
        std::vector<double> xs = x0;
        if (s > 0) {
            GaussianStream perturb(derive_seed(options.seed, s));
            for (std::size_t i = 0; i < dim; ++i)
                xs[i] = std::clamp(xs[i] + 0.8 * perturb.next(), lo[i], hi[i]);
        }
        auto r = nelder_mead(objective, xs, lo, hi, nm);
        // polish from the found point with a fresh, tighter simplex
        NelderMeadOptions polish = nm;
        polish.initial_step = 0.05;
        auto r2 = nelder_mead(objective, r.x, lo, hi, polish);
        if (r2.fx < r.fx) r = std::move(r2);

        result.starts.push_back({s, r.fx, r.iterations, r.converged});
        any_converged = any_converged || r.converged;
        if (r.fx < best) {  // strict: earlier start wins ties
            best = r.fx;
            best_x = r.x;
        }
    }

    objective(best_x);  // materialize best parameters into `work`
    result.params = work;
    result.residual = best;
    if (!any_converged)
        throw NumericalError("no fit start converged; best residual " +
                             std::to_string(best));
    return result;
}

} // namespace cn2
