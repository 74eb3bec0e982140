#include "cn2/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cn2/csv.hpp"
#include "cn2/errors.hpp"
#include "cn2/fft.hpp"
#include "cn2/parallel.hpp"
#include "cn2/profile_prep.hpp"
#include "cn2/random.hpp"

namespace cn2 {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSpectralConst = 0.033;

using GaussKronrod = boost::math::quadrature::gauss_kronrod<double, 31>;

/// 1 - sin(x)/x without cancellation at small arguments.
double one_minus_sinc(double x) {
    if (x < 1e-2) {
        const double x2 = x * x;
        return x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0));
    }
    return 1.0 - std::sin(x) / x;
}

} // namespace

void VonKarmanParams::validate() const {
    if (cn2 <= 0.0) throw ConfigError("cn2 must be positive");
    if (!(outer_scale_m > inner_scale_m && inner_scale_m > 0.0))
        throw ConfigError("scales must satisfy L0 > l0 > 0");
}

double spectrum_3d(double kappa, const VonKarmanParams& params) {
    const double k0 = params.kappa0();
    return kSpectralConst * params.cn2 * std::pow(kappa * kappa + k0 * k0, -11.0 / 6.0);
}

double spectrum_1d(double kappa, const VonKarmanParams& params) {
    const double k0 = params.kappa0();
    return kSpectralConst * (6.0 * kPi / 5.0) * params.cn2 *
           std::pow(kappa * kappa + k0 * k0, -5.0 / 6.0);
}

double von_karman_variance(const VonKarmanParams& params) {
    // 2 * int_0^inf V_n dk = 0.033*(6pi/5) * B(1/2,1/3) * cn2 * kappa0^(-2/3)
    const double beta = std::tgamma(0.5) * std::tgamma(1.0 / 3.0) / std::tgamma(5.0 / 6.0);
    return kSpectralConst * (6.0 * kPi / 5.0) * beta * params.cn2 *
           std::pow(params.kappa0(), -2.0 / 3.0);
}

double theoretical_structure_function(double rho_m,
                                      const std::function<double(double)>& spectrum,
                                      const QuadratureOptions& options) {
    if (rho_m <= 0.0) throw ConfigError("separation must be positive");

    auto integrand = [&](double kappa) {
        if (kappa <= 0.0) return 0.0;
        const double phi = spectrum(kappa);
        if (!std::isfinite(phi)) return 0.0;  // admissible spectra vanish here in the limit
        return kappa * kappa * phi * one_minus_sinc(kappa * rho_m);
    };

    const double segment = kPi / rho_m;  // half oscillation period
    double total = 0.0;
    for (std::size_t j = 0; j < options.max_segments; ++j) {
        const double a = static_cast<double>(j) * segment;
        const double b = a + segment;
        total += GaussKronrod::integrate(integrand, a, b, 12, 1e-9);
        if (j < 8) continue;

        // Power-law tail: Phi(k) ~ Phi(b) (k/b)^s for k > b.
        const double phi_b = spectrum(b);
        const double phi_2b = spectrum(2.0 * b);
        if (!(phi_b > 0.0) || !(phi_2b > 0.0)) {
            if (total != 0.0) return 8.0 * kPi * total;  // spectrum ended; nothing left
            throw NumericalError("spectrum not positive at cutoff " +
                                 std::to_string(b) + " rad/m");
        }
        const double slope = std::log(phi_2b / phi_b) / std::numbers::ln2;
        if (slope < -3.01) {
            const double tail = phi_b * b * b * b / (-slope - 3.0);
            // The oscillatory residual of the tail is bounded by tail/(b*rho).
            if (tail / (b * rho_m) < 0.5 * options.rel_tol * (total + tail))
                return 8.0 * kPi * (total + tail);
        }
    }
    throw NumericalError("structure-function quadrature did not converge at rho=" +
                         std::to_string(rho_m) + " m (cutoff " +
                         std::to_string(static_cast<double>(options.max_segments) * segment) +
                         " rad/m, rel_tol " + std::to_string(options.rel_tol) + ")");
}

std::vector<double> SyntheticField::total_index(double guard_fraction) const {
    if (guard_fraction < 0.0 || guard_fraction >= 0.5)
        throw ConfigError("guard fraction must lie in [0, 0.5)");
    const auto guard = static_cast<std::size_t>(
        std::floor(guard_fraction * static_cast<double>(n1.size())));
    std::vector<double> out;
    out.reserve(n1.size() - 2 * guard);
    for (std::size_t i = guard; i < n1.size() - guard; ++i) out.push_back(n0 + n1[i]);
    return out;
}

SyntheticField synthesize_fluctuations(std::size_t count, double dz_m,
                                       const VonKarmanParams& params,
                                       std::uint64_t seed,
                                       const SynthesisOptions& options) {
    params.validate();
    if (dz_m <= 0.0) throw ConfigError("dz must be positive");
    if (!is_power_of_two(count))
        throw ConfigError("sample count " + std::to_string(count) +
                          " is not a power of two");

    const double kappa_s = 2.0 * kPi / dz_m;          // sampling frequency
    const double dkappa = kappa_s / static_cast<double>(count);

    // Alias-folded 1-D spectrum on the resolved band, plus a flat floor
    // carrying the variance beyond the folded terms.
    const std::size_t M = options.alias_terms;
    const double cutoff = (static_cast<double>(M) + 0.5) * kappa_s;
    const double tail_integral = GaussKronrod::integrate(
        [&](double u) {
            const double k = cutoff / u;
            return spectrum_1d(k, params) * cutoff / (u * u);
        },
        0.0, 1.0, 12, 1e-9);
    const double tail_floor = 2.0 * tail_integral / kappa_s;

    std::vector<double> folded(count / 2 + 1);
    for (std::size_t j = 0; j <= count / 2; ++j) {
        const double k = dkappa * static_cast<double>(j);
        double v = spectrum_1d(k, params);
        for (std::size_t m = 1; m <= M; ++m) {
            const double shift = static_cast<double>(m) * kappa_s;
            v += spectrum_1d(shift + k, params) + spectrum_1d(shift - k, params);
        }
        folded[j] = v + tail_floor;
    }

    SyntheticField field;
    field.dz_m = dz_m;
    field.params = params;
    field.seed = seed;
    field.n0 = options.mean_n0;
    field.band_variance = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
        const std::size_t jj = j <= count / 2 ? j : count - j;
        field.band_variance += folded[jj] * dkappa;
    }

    GaussianStream noise(seed);
    std::vector<std::complex<double>> work(count);
    for (auto& x : work) x = noise.next();
    fft_pow2(work, false);
    const double gain = std::sqrt(kappa_s);  // H = sqrt(V_d * 2pi/dz)
    for (std::size_t j = 0; j < count; ++j) {
        const std::size_t jj = j <= count / 2 ? j : count - j;
        work[j] *= gain * std::sqrt(folded[jj]);
    }
    fft_pow2(work, true);

    field.n1.resize(count);
    for (std::size_t j = 0; j < count; ++j) field.n1[j] = work[j].real();
    return field;
}

std::vector<StudyRow> scale_factor_study(const StudyConfig& config) {
    if (config.dz_list.empty() || config.outer_scale_list.empty() ||
        config.window_list.empty() || config.separation_steps_list.empty())
        throw ConfigError("study parameter lists must be non-empty");
    if (config.trials == 0) throw ConfigError("study needs at least one trial");

    struct FieldCell {
        double dz = 0.0;
        double outer_scale = 0.0;
    };
    std::vector<FieldCell> cells;
    for (double dz : config.dz_list)
        for (double L0 : config.outer_scale_list) cells.push_back({dz, L0});

    // ratios[cell][estimator][trial]
    const std::size_t n_est = config.window_list.size() * config.separation_steps_list.size();
    std::vector<std::vector<std::vector<double>>> ratios(
        cells.size(), std::vector<std::vector<double>>(n_est,
                                                       std::vector<double>(config.trials)));

    const std::size_t jobs = cells.size() * config.trials;
    parallel_for(jobs, config.threads, [&](std::size_t job) {
        const std::size_t cell_idx = job / config.trials;
        const std::size_t trial = job % config.trials;
        const auto& cell = cells[cell_idx];
        VonKarmanParams params;
        params.cn2 = config.cn2;
        params.outer_scale_m = cell.outer_scale;

        const auto field = synthesize_fluctuations(
            config.samples, cell.dz, params, derive_seed(config.seed, job));
        const auto n_total = field.total_index(config.guard_fraction);

        std::size_t est_idx = 0;
        for (std::size_t w : config.window_list) {
            const auto fluct = extract_fluctuations(n_total, 0.0, cell.dz, w);
            for (std::size_t m : config.separation_steps_list) {
                EstimatorConfig est;
                est.dz_m = cell.dz;
                est.window_half_width = w;
                est.separation_steps = m;
                est.scale_factor = 1.0;
                const auto profile = estimate_cn2(fluct, est);
                double mean = 0.0;
                for (double v : profile.cn2) mean += v;
                mean /= static_cast<double>(profile.size());
                ratios[cell_idx][est_idx][trial] = mean / config.cn2;
                ++est_idx;
            }
        }
    });

    std::vector<StudyRow> rows;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::size_t est_idx = 0;
        for (std::size_t w : config.window_list) {
            for (std::size_t m : config.separation_steps_list) {
                const auto& r = ratios[c][est_idx];
                double mean = 0.0;
                for (double v : r) mean += v;
                mean /= static_cast<double>(r.size());
                double var = 0.0;
                for (double v : r) var += (v - mean) * (v - mean);
                var = r.size() > 1 ? var / static_cast<double>(r.size() - 1) : 0.0;
                rows.push_back({cells[c].dz, cells[c].outer_scale, w, m,
                                config.trials, mean, std::sqrt(var)});
                ++est_idx;
            }
        }
    }
    return rows;
}

void serialize_study_csv(std::span<const StudyRow> rows, std::ostream& out) {
    out << "dz_m,L0_m,omega,m,trials,ratio_mean,ratio_std\n";
    for (const auto& r : rows)
        out << csv::format_double(r.dz_m) << ',' << csv::format_double(r.outer_scale_m)
            << ',' << r.window_half_width << ',' << r.separation_steps << ','
            << r.trials << ',' << csv::format_double(r.ratio_mean) << ','
            << csv::format_double(r.ratio_std) << '\n';
}

void serialize_field_csv(const SyntheticField& field, std::ostream& out) {
    out << "z_m,n1\n";
    for (std::size_t i = 0; i < field.n1.size(); ++i)
        out << csv::format_double(static_cast<double>(i) * field.dz_m) << ','
            << csv::format_double(field.n1[i]) << '\n';
}

} // namespace cn2
