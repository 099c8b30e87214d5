#pragma once

#include <cstdint>
#include <vector>

#include "shelvesim/rng.hpp"

namespace shelvesim::camera {

struct FrameSpec {
    int width = 16;
    int height = 16;
    double psf_x = 7.5;  // subpixel center
    double psf_y = 7.5;
    double psf_sigma = 1.5;         // pixels
    double quantum_efficiency = 0.8;
    double em_gain = 300.0;         // mean multiplication factor
    double read_noise_adu = 10.0;
    double bias_adu = 100.0;
    double adu_per_electron = 0.2;

    void validate() const;
};

struct Frame {
    int width = 0;
    int height = 0;
    std::vector<uint16_t> adu;  // row-major

    uint16_t at(int x, int y) const { return adu[static_cast<size_t>(y) * width + x]; }
};

struct Roi {
    double center_x = 0.0;
    double center_y = 0.0;
    double sigma = 0.0;
    // square window of side ceil(6 sigma), clipped to the frame
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)

    int pixel_count() const { return (x1 - x0) * (y1 - y0); }
};

Roi make_roi(double cx, double cy, double sigma, int frame_w, int frame_h);

// Compound EMCCD model: Poisson photoelectrons per pixel (integrated Gaussian
// PSF), Gamma EM amplification, Gaussian read noise, bias, clamped integer ADU.
Frame render_frame(int photon_count, const FrameSpec& spec, uint64_t seed);

// Least-squares 2D Gaussian fit on the mean of the calibration frames.
// Throws std::runtime_error("no ion located") when no peak is present.
Roi fit_roi(const std::vector<Frame>& calibration_frames);

// Sum of the n_hot largest bias-subtracted pixel values within the ROI.
double roi_counts(const Frame& frame, const Roi& roi, int n_hot, double bias_adu);

// Bias-subtracted ROI pixels, row-major, as classifier features.
std::vector<float> roi_pixels(const Frame& frame, const Roi& roi, double bias_adu);

}  // namespace shelvesim::camera
