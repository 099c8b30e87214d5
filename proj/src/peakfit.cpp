#include "shelvesim/peakfit.hpp"

#include <algorithm>
#include <cmath>

#include "shelvesim/levmar.hpp"

namespace shelvesim::fit {

namespace {

struct Seed {
    double center, amplitude, width;
};

// Local-maxima seeds, tallest first. Seeding runs on a lightly smoothed copy
// so that noise bumps riding on a tall peak cannot outrank a genuine smaller
// peak; the subsequent fit still uses the raw data.
std::vector<Seed> find_seeds(std::span<const double> x, std::span<const double> y, int n_peaks) {
    const size_t n = x.size();
    // moving-average half width; capped so densely sampled narrow peaks survive
    const size_t h = std::clamp<size_t>(n / 100, 1, 6);
    std::vector<double> smooth(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t lo = i > h ? i - h : 0;
        const size_t hi = std::min(n - 1, i + h);
        double sum = 0.0;
        for (size_t j = lo; j <= hi; ++j) sum += y[j];
        smooth[i] = sum / (hi - lo + 1);
    }
    const double base = *std::min_element(smooth.begin(), smooth.end());

    std::vector<size_t> maxima;
    for (size_t i = 1; i + 1 < n; ++i)
        if (smooth[i] > smooth[i - 1] && smooth[i] >= smooth[i + 1] && smooth[i] > base)
            maxima.push_back(i);
    std::sort(maxima.begin(), maxima.end(),
              [&](size_t a, size_t b) { return smooth[a] > smooth[b]; });

    std::vector<Seed> seeds;
    std::vector<size_t> taken;
    for (size_t idx : maxima) {
        if (static_cast<int>(seeds.size()) == n_peaks) break;
        bool shadowed = false;
        for (size_t t : taken)
            if ((idx > t ? idx - t : t - idx) <= 2 * h) shadowed = true;
        if (shadowed) continue;
        taken.push_back(idx);
        // half width at half maximum from the nearest crossing
        const double half = base + 0.5 * (smooth[idx] - base);
        size_t r = idx;
        while (r + 1 < n && smooth[r] > half) ++r;
        size_t l = idx;
        while (l > 0 && smooth[l] > half) --l;
        double width = 0.5 * (x[r] - x[l]) / 1.177;  // HWHM -> sigma
        if (width <= 0.0) width = (x.back() - x.front()) / (10.0 * n_peaks);
        seeds.push_back({x[idx], smooth[idx] - base, width});
    }
    return seeds;
}

}  // namespace

std::vector<GaussianPeak> gaussian_peak_fit(std::span<const double> x, std::span<const double> y,
                                            int n_peaks) {
    if (n_peaks < 1) throw std::invalid_argument("peak fit: n_peaks must be >= 1");
    if (x.size() != y.size() || x.size() < static_cast<size_t>(4 * n_peaks))
        throw std::invalid_argument("peak fit: need len(x) = len(y) >= 4 * n_peaks");
    for (size_t i = 1; i < x.size(); ++i)
        if (x[i] <= x[i - 1]) throw std::invalid_argument("peak fit: x must be strictly increasing");

    const auto seeds = find_seeds(x, y, n_peaks);
    if (static_cast<int>(seeds.size()) < n_peaks)
        throw PeakFitFailure("peak fit: could not locate enough peaks", 0.0);

    const size_t m = x.size();
    const size_t np = 1 + 3 * static_cast<size_t>(n_peaks);  // offset + (a, c, s) per peak

    auto model = [&](const std::vector<double>& p, double xi) {
        double v = p[0];
        for (int j = 0; j < n_peaks; ++j) {
            const double a = p[1 + 3 * j];
            const double c = p[2 + 3 * j];
            const double s = p[3 + 3 * j];
            const double t = (xi - c) / s;
            v += a * std::exp(-0.5 * t * t);
        }
        return v;
    };
    ResidualFn residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
        for (size_t i = 0; i < m; ++i) r[i] = model(p, x[i]) - y[i];
    };
    JacobianFn jacobian = [&](const std::vector<double>& p, std::vector<double>& J) {
        for (size_t i = 0; i < m; ++i) {
            J[i * np + 0] = 1.0;
            for (int j = 0; j < n_peaks; ++j) {
                const double a = p[1 + 3 * j];
                const double c = p[2 + 3 * j];
                const double s = p[3 + 3 * j];
                const double t = (x[i] - c) / s;
                const double g = std::exp(-0.5 * t * t);
                J[i * np + 1 + 3 * j] = g;
                J[i * np + 2 + 3 * j] = a * g * t / s;
                J[i * np + 3 + 3 * j] = a * g * t * t / s;
            }
        }
    };

    std::vector<double> init(np);
    init[0] = *std::min_element(y.begin(), y.end());
    for (int j = 0; j < n_peaks; ++j) {
        init[1 + 3 * j] = seeds[j].amplitude;
        init[2 + 3 * j] = seeds[j].center;
        init[3 + 3 * j] = seeds[j].width;
    }

    auto result = levmar(residuals, jacobian, init, m);
    if (!result.converged)
        throw PeakFitFailure("peak fit: no convergence", std::sqrt(result.ssr / m));

    std::vector<GaussianPeak> peaks(n_peaks);
    for (int j = 0; j < n_peaks; ++j) {
        peaks[j].offset = result.params[0];
        peaks[j].offset_err = result.std_errors[0];
        peaks[j].amplitude = result.params[1 + 3 * j];
        peaks[j].amplitude_err = result.std_errors[1 + 3 * j];
        peaks[j].center = result.params[2 + 3 * j];
        peaks[j].center_err = result.std_errors[2 + 3 * j];
        peaks[j].width = std::abs(result.params[3 + 3 * j]);
        peaks[j].width_err = result.std_errors[3 + 3 * j];
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const GaussianPeak& a, const GaussianPeak& b) { return a.center < b.center; });
    return peaks;
}

}  // namespace shelvesim::fit
