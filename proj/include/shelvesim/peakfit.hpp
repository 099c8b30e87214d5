#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shelvesim::fit {

struct GaussianPeak {
    double center = 0.0;
    double width = 0.0;      // sigma
    double amplitude = 0.0;
    double offset = 0.0;     // shared constant baseline
    double center_err = 0.0;
    double width_err = 0.0;
    double amplitude_err = 0.0;
    double offset_err = 0.0;
};

struct PeakFitFailure : std::runtime_error {
    double residual_norm;
    PeakFitFailure(const std::string& what, double residual)
        : std::runtime_error(what), residual_norm(residual) {}
};

// Multi-Gaussian nonlinear least squares with a shared constant offset.
// Initialization from the n_peaks highest local maxima of y.
std::vector<GaussianPeak> gaussian_peak_fit(std::span<const double> x, std::span<const double> y,
                                            int n_peaks);

}  // namespace shelvesim::fit
