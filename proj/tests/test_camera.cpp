#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "shelvesim/camera.hpp"

using namespace shelvesim;
using namespace shelvesim::camera;

namespace {

double pixel_mass(double x, double center, double sigma) {
    const double a = (x - center) / (sigma * std::sqrt(2.0));
    const double b = (x + 1.0 - center) / (sigma * std::sqrt(2.0));
    return 0.5 * (std::erf(b) - std::erf(a));
}

}  // namespace

TEST_CASE("frame spec validation") {
    FrameSpec s;
    CHECK_NOTHROW(s.validate());
    s.em_gain = 0.5;
    CHECK_THROWS_AS(s.validate(), std::domain_error);
    s = FrameSpec{};
    s.quantum_efficiency = 1.2;
    CHECK_THROWS_AS(s.validate(), std::domain_error);
    s = FrameSpec{};
    s.psf_sigma = 0.0;
    CHECK_THROWS_AS(s.validate(), std::domain_error);
}

TEST_CASE("rendering is deterministic in the seed") {
    FrameSpec s;
    const auto a = render_frame(500, s, 42);
    const auto b = render_frame(500, s, 42);
    CHECK(a.adu == b.adu);
    const auto c = render_frame(500, s, 43);
    CHECK(a.adu != c.adu);
    CHECK_THROWS_AS(render_frame(-1, s, 0), std::domain_error);
}

TEST_CASE("zero photons leave bias plus read noise") {
    FrameSpec s;
    const long n = 2000;
    double sum = 0.0, sq = 0.0;
    long count = 0;
    for (long i = 0; i < n; ++i) {
        const auto f = render_frame(0, s, derive_seed(3, i));
        for (uint16_t v : f.adu) {
            sum += v;
            sq += static_cast<double>(v) * v;
            ++count;
        }
    }
    const double mean = sum / count;
    const double var = sq / count - mean * mean;
    CHECK(mean == doctest::Approx(s.bias_adu).epsilon(2e-3));
    // rounding to integer ADU adds 1/12 to the read-noise variance
    CHECK(var == doctest::Approx(s.read_noise_adu * s.read_noise_adu + 1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("pixel mean and variance follow the compound EMCCD model") {
    FrameSpec s;
    const int photons = 300;
    const double mu = photons * s.quantum_efficiency * pixel_mass(7, s.psf_x, s.psf_sigma) *
                      pixel_mass(7, s.psf_y, s.psf_sigma);
    const double k = s.adu_per_electron;
    const double expect_mean = s.bias_adu + mu * s.em_gain * k;
    // Poisson-Gamma compound: Var = 2 mu G^2, plus read noise and rounding
    const double expect_var = 2.0 * mu * s.em_gain * s.em_gain * k * k +
                              s.read_noise_adu * s.read_noise_adu + 1.0 / 12.0;

    const long n = 40'000;
    double sum = 0.0, sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const auto f = render_frame(photons, s, derive_seed(11, i));
        const double v = f.at(7, 7);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean - expect_mean) < 4.0 * std::sqrt(expect_var / n));
    CHECK(var == doctest::Approx(expect_var).epsilon(0.08));
}

TEST_CASE("mean image centroid sits on the configured PSF center") {
    FrameSpec s;
    s.psf_x = 6.3;
    s.psf_y = 9.1;
    const long n = 3000;
    std::vector<double> mean(256, 0.0);
    for (long i = 0; i < n; ++i) {
        const auto f = render_frame(800, s, derive_seed(21, i));
        for (size_t j = 0; j < mean.size(); ++j) mean[j] += f.adu[j];
    }
    double wx = 0.0, wy = 0.0, w = 0.0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double v = mean[y * 16 + x] / n - s.bias_adu;
            wx += v * (x + 0.5);
            wy += v * (y + 0.5);
            w += v;
        }
    CHECK(wx / w == doctest::Approx(s.psf_x).epsilon(0.01));
    CHECK(wy / w == doctest::Approx(s.psf_y).epsilon(0.01));
}

TEST_CASE("roi geometry: centered, clipped, never empty") {
    const auto r = make_roi(7.5, 7.5, 1.5, 16, 16);
    CHECK(r.x1 - r.x0 == 9);
    CHECK(r.y1 - r.y0 == 9);
    CHECK(r.x0 <= 7);
    CHECK(r.x1 >= 9);
    CHECK(r.pixel_count() == 81);

    const auto edge = make_roi(0.5, 15.5, 1.5, 16, 16);
    CHECK(edge.x0 == 0);
    CHECK(edge.y1 == 16);
    CHECK(edge.pixel_count() >= 1);
}

TEST_CASE("roi_counts sums the hottest pixels") {
    Frame f;
    f.width = 4;
    f.height = 4;
    f.adu = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25};
    Roi roi;
    roi.x0 = 0;
    roi.y0 = 0;
    roi.x1 = 4;
    roi.y1 = 4;
    CHECK(roi_counts(f, roi, 1, 5.0) == doctest::Approx(20.0));
    CHECK(roi_counts(f, roi, 3, 5.0) == doctest::Approx(20.0 + 19.0 + 18.0));
    CHECK(roi_counts(f, roi, 16, 0.0) == doctest::Approx(280.0));
    CHECK_THROWS_AS(roi_counts(f, roi, 0, 0.0), std::domain_error);
    CHECK_THROWS_AS(roi_counts(f, roi, 17, 0.0), std::domain_error);
    Roi bad = roi;
    bad.x1 = 5;
    CHECK_THROWS_AS(roi_counts(f, bad, 1, 0.0), std::domain_error);
}

TEST_CASE("roi_pixels are row-major and bias subtracted") {
    Frame f;
    f.width = 3;
    f.height = 2;
    f.adu = {1, 2, 3, 4, 5, 6};
    Roi roi;
    roi.x0 = 1;
    roi.y0 = 0;
    roi.x1 = 3;
    roi.y1 = 2;
    const auto p = roi_pixels(f, roi, 1.0);
    CHECK(p == std::vector<float>{1.0f, 2.0f, 4.0f, 5.0f});
}

TEST_CASE("fit_roi recovers the PSF from calibration frames") {
    FrameSpec s;
    s.psf_x = 6.8;
    s.psf_y = 8.4;
    std::vector<Frame> frames;
    for (long i = 0; i < 400; ++i) frames.push_back(render_frame(1500, s, derive_seed(9, i)));
    const auto roi = fit_roi(frames);
    CHECK(roi.center_x == doctest::Approx(s.psf_x).epsilon(0.02));
    CHECK(roi.center_y == doctest::Approx(s.psf_y).epsilon(0.02));
    CHECK(roi.sigma == doctest::Approx(s.psf_sigma).epsilon(0.1));
}

TEST_CASE("fit_roi rejects frames without an ion") {
    FrameSpec s;
    std::vector<Frame> dark;
    for (long i = 0; i < 50; ++i) dark.push_back(render_frame(0, s, derive_seed(13, i)));
    CHECK_THROWS_WITH_AS(fit_roi(dark), "no ion located", std::runtime_error);

    Frame flat;
    flat.width = 8;
    flat.height = 8;
    flat.adu.assign(64, 100);
    CHECK_THROWS_WITH_AS(fit_roi({flat}), "no ion located", std::runtime_error);
    CHECK_THROWS_AS(fit_roi({}), std::invalid_argument);
}
