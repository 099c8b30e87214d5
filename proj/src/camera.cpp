#include "shelvesim/camera.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shelvesim/levmar.hpp"

namespace shelvesim::camera {

void FrameSpec::validate() const {
    if (width < 1 || height < 1) throw std::domain_error("frame spec: dimensions must be >= 1");
    if (psf_sigma <= 0.0) throw std::domain_error("frame spec: psf sigma must be > 0");
    if (quantum_efficiency < 0.0 || quantum_efficiency > 1.0)
        throw std::domain_error("frame spec: QE outside [0,1]");
    if (em_gain < 1.0) throw std::domain_error("frame spec: gain must be >= 1");
    if (read_noise_adu < 0.0) throw std::domain_error("frame spec: negative read noise");
    if (adu_per_electron <= 0.0) throw std::domain_error("frame spec: conversion must be > 0");
}

Roi make_roi(double cx, double cy, double sigma, int frame_w, int frame_h) {
    Roi roi;
    roi.center_x = cx;
    roi.center_y = cy;
    roi.sigma = sigma;
    const int side = static_cast<int>(std::ceil(6.0 * sigma));
    const int half = side / 2;
    roi.x0 = std::max(0, static_cast<int>(std::lround(cx)) - half);
    roi.y0 = std::max(0, static_cast<int>(std::lround(cy)) - half);
    roi.x1 = std::min(frame_w, roi.x0 + side);
    roi.y1 = std::min(frame_h, roi.y0 + side);
    roi.x0 = std::max(0, std::min(roi.x0, roi.x1 - 1));
    roi.y0 = std::max(0, std::min(roi.y0, roi.y1 - 1));
    if (roi.pixel_count() < 1) throw std::domain_error("roi: empty window");
    return roi;
}

namespace {

inline double norm_cdf_unit(double z) { return 0.5 * std::erfc(-z * 0.7071067811865476); }

// Gaussian PSF mass integrated over pixel (x, x+1)
double pixel_mass_1d(double x, double center, double sigma) {
    return norm_cdf_unit((x + 1.0 - center) / sigma) - norm_cdf_unit((x - center) / sigma);
}

}  // namespace

Frame render_frame(int photon_count, const FrameSpec& spec, uint64_t seed) {
    spec.validate();
    if (photon_count < 0) throw std::domain_error("render_frame: negative photon count");

    Rng rng(seed);
    Frame f;
    f.width = spec.width;
    f.height = spec.height;
    f.adu.resize(static_cast<size_t>(spec.width) * spec.height);

    std::vector<double> mass_x(spec.width), mass_y(spec.height);
    for (int x = 0; x < spec.width; ++x) mass_x[x] = pixel_mass_1d(x, spec.psf_x, spec.psf_sigma);
    for (int y = 0; y < spec.height; ++y) mass_y[y] = pixel_mass_1d(y, spec.psf_y, spec.psf_sigma);

    const double mean_pe = photon_count * spec.quantum_efficiency;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const double mu = mean_pe * mass_x[x] * mass_y[y];
            const uint64_t n_e = rng.poisson(mu);
            double signal_e = n_e > 0 ? rng.gamma_int(n_e, spec.em_gain) : 0.0;
            double adu = signal_e * spec.adu_per_electron + spec.bias_adu +
                         rng.normal(0.0, spec.read_noise_adu);
            adu = std::clamp(std::round(adu), 0.0, 65535.0);
            f.adu[static_cast<size_t>(y) * spec.width + x] = static_cast<uint16_t>(adu);
        }
    }
    return f;
}

Roi fit_roi(const std::vector<Frame>& calibration_frames) {
    if (calibration_frames.empty()) throw std::invalid_argument("fit_roi: no calibration frames");
    const int w = calibration_frames.front().width;
    const int h = calibration_frames.front().height;
    for (const auto& f : calibration_frames)
        if (f.width != w || f.height != h) throw std::invalid_argument("fit_roi: frame size mismatch");

    std::vector<double> mean(static_cast<size_t>(w) * h, 0.0);
    for (const auto& f : calibration_frames)
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += f.adu[i];
    for (auto& v : mean) v /= calibration_frames.size();

    // initialize from the peak pixel and image moments
    double lo = mean[0], hi = mean[0];
    int px = 0, py = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = mean[static_cast<size_t>(y) * w + x];
            if (v > hi) {
                hi = v;
                px = x;
                py = y;
            }
            lo = std::min(lo, v);
        }
    if (hi - lo < 1e-9) throw std::runtime_error("no ion located");

    const size_t m = mean.size();
    auto model = [&](const std::vector<double>& p, int x, int y) {
        const double dx = (x + 0.5 - p[1]) / p[3];
        const double dy = (y + 0.5 - p[2]) / p[3];
        return p[4] + p[0] * std::exp(-0.5 * (dx * dx + dy * dy));
    };
    fit::ResidualFn residuals = [&](const std::vector<double>& p, std::vector<double>& r) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                r[static_cast<size_t>(y) * w + x] = model(p, x, y) - mean[static_cast<size_t>(y) * w + x];
    };
    fit::JacobianFn jacobian = [&](const std::vector<double>& p, std::vector<double>& J) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                const double dx = x + 0.5 - p[1];
                const double dy = y + 0.5 - p[2];
                const double s2 = p[3] * p[3];
                const double g = std::exp(-0.5 * (dx * dx + dy * dy) / s2);
                J[i * 5 + 0] = g;
                J[i * 5 + 1] = p[0] * g * dx / s2;
                J[i * 5 + 2] = p[0] * g * dy / s2;
                J[i * 5 + 3] = p[0] * g * (dx * dx + dy * dy) / (s2 * p[3]);
                J[i * 5 + 4] = 1.0;
            }
    };

    // params: amplitude, cx, cy, sigma, offset
    std::vector<double> init = {hi - lo, px + 0.5, py + 0.5, 1.5, lo};
    auto result = fit::levmar(residuals, jacobian, init, m);
    if (!result.converged) throw std::runtime_error("no ion located");

    const double amp = result.params[0];
    const double sigma = std::abs(result.params[3]);
    // amplitude must clear the residual noise floor to count as an ion
    const double noise = std::sqrt(result.ssr / m);
    if (amp < 5.0 * noise || sigma <= 0.0) throw std::runtime_error("no ion located");

    return make_roi(result.params[1], result.params[2], sigma, w, h);
}

double roi_counts(const Frame& frame, const Roi& roi, int n_hot, double bias_adu) {
    if (roi.x0 < 0 || roi.y0 < 0 || roi.x1 > frame.width || roi.y1 > frame.height)
        throw std::domain_error("roi_counts: ROI outside frame");
    if (n_hot < 1 || n_hot > roi.pixel_count())
        throw std::domain_error("roi_counts: n_hot outside [1, |roi|]");

    std::vector<double> values;
    values.reserve(roi.pixel_count());
    for (int y = roi.y0; y < roi.y1; ++y)
        for (int x = roi.x0; x < roi.x1; ++x) values.push_back(frame.at(x, y) - bias_adu);
    std::partial_sort(values.begin(), values.begin() + n_hot, values.end(),
                      std::greater<double>());
    double sum = 0.0;
    for (int i = 0; i < n_hot; ++i) sum += values[i];
    return sum;
}

std::vector<float> roi_pixels(const Frame& frame, const Roi& roi, double bias_adu) {
    if (roi.x0 < 0 || roi.y0 < 0 || roi.x1 > frame.width || roi.y1 > frame.height)
        throw std::domain_error("roi_pixels: ROI outside frame");
    std::vector<float> out;
    out.reserve(roi.pixel_count());
    for (int y = roi.y0; y < roi.y1; ++y)
        for (int x = roi.x0; x < roi.x1; ++x)
            out.push_back(static_cast<float>(frame.at(x, y) - bias_adu));
    return out;
}

}  // namespace shelvesim::camera
