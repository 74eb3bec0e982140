#include "cn2/neldermead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cn2/errors.hpp"

namespace cn2 {

namespace {

void project(std::vector<double>& x, std::span<const double> lo,
             std::span<const double> hi) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
}

} // namespace

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> x0,
                             std::span<const double> lower,
                             std::span<const double> upper,
                             const NelderMeadOptions& options) {
    const std::size_t n = x0.size();
    if (n == 0) throw ConfigError("nothing to optimize");
    if (lower.size() != n || upper.size() != n)
        throw ConfigError("bound vectors must match the parameter dimension");
    for (std::size_t i = 0; i < n; ++i)
        if (!(lower[i] <= upper[i]))
            throw ConfigError("lower bound exceeds upper bound at index " +
                              std::to_string(i));

    constexpr double alpha = 1.0, gamma = 2.0, beta = 0.5, sigma = 0.5;

    std::vector<std::vector<double>> simplex(n + 1, std::vector<double>(x0.begin(), x0.end()));
    for (std::size_t i = 0; i < n; ++i) {
        double step = options.initial_step;
        if (simplex[i + 1][i] + step > upper[i]) step = -step;
        simplex[i + 1][i] += step;
        project(simplex[i + 1], lower, upper);
    }
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) values[i] = f(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    NelderMeadResult result;
    for (result.iterations = 0; result.iterations < options.max_iterations;
         ++result.iterations) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back();
        const std::size_t second_worst = order[n - 1];

        double x_spread = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mn = simplex[0][i], mx = simplex[0][i];
            for (std::size_t v = 1; v <= n; ++v) {
                mn = std::min(mn, simplex[v][i]);
                mx = std::max(mx, simplex[v][i]);
            }
            x_spread = std::max(x_spread, mx - mn);
        }
        if (values[worst] - values[best] <=
                options.f_tol * (1.0 + std::abs(values[best])) &&
            x_spread <= options.x_tol) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t v = 0; v <= n; ++v) {
            if (v == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v][i];
        }
        for (auto& c : centroid) c /= static_cast<double>(n);

        auto blend = [&](double t) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i)
                x[i] = centroid[i] + t * (centroid[i] - simplex[worst][i]);
            project(x, lower, upper);
            return x;
        };

        auto reflected = blend(alpha);
        const double f_reflected = f(reflected);
        if (f_reflected < values[order[0]]) {
            auto expanded = blend(gamma);
            const double f_expanded = f(expanded);
            if (f_expanded < f_reflected) {
                simplex[worst] = std::move(expanded);
                values[worst] = f_expanded;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = f_reflected;
            }
            continue;
        }
        if (f_reflected < values[second_worst]) {
            simplex[worst] = std::move(reflected);
            values[worst] = f_reflected;
            continue;
        }
        auto contracted = blend(f_reflected < values[worst] ? beta : -beta);
        const double f_contracted = f(contracted);
        if (f_contracted < std::min(values[worst], f_reflected)) {
            simplex[worst] = std::move(contracted);
            values[worst] = f_contracted;
            continue;
        }
        // shrink toward the best vertex
        for (std::size_t v = 0; v <= n; ++v) {
            if (v == best) continue;
            for (std::size_t i = 0; i < n; ++i)
                simplex[v][i] = simplex[best][i] + sigma * (simplex[v][i] - simplex[best][i]);
            project(simplex[v], lower, upper);
            values[v] = f(simplex[v]);
        }
    }

    std::size_t best = 0;
    for (std::size_t v = 1; v <= n; ++v)
        if (values[v] < values[best]) best = v;
    result.x = simplex[best];
    result.fx = values[best];
    return result;
}

} // namespace cn2
