#pragma once

#include <span>
#include <vector>

namespace shelvesim::classify {

// labels: 0 = dark, 1 = bright throughout

struct ThresholdModel {
    double threshold = 0.0;  // bright iff value > threshold
};

// Exhaustive scan over candidate thresholds (midpoints of sorted unique
// values plus extremes) minimizing (eps_d + eps_b)/2; ties toward the larger
// threshold.
ThresholdModel fit_threshold(std::span<const double> values, std::span<const int> labels);

inline int classify_threshold(const ThresholdModel& m, double value) {
    return value > m.threshold ? 1 : 0;
}

struct SubbinModel {
    int k = 5;
    double subbin_s = 50e-6;       // Delta
    double lambda_bright = 0.0;    // expected counts per subbin while scattering
    double lambda_dark = 0.0;      // expected counts per subbin while dark
    double tau_bright_s = 0.0;     // bright -> dark leak time
    double tau_dark_s = 0.0;       // dark -> bright leak time
    double prior_bright = 0.5;
    bool include_dark_leak = true;
};

enum class Hypothesis { Dark, Bright };

// log P(counts | hypothesis) under the single-leak mixture model
double subbin_log_likelihood(const SubbinModel& m, std::span<const int> counts, Hypothesis h);

struct SubbinDecision {
    int label = 0;
    double log_likelihood_ratio = 0.0;  // includes the prior weight
};

SubbinDecision classify_subbin(const SubbinModel& m, std::span<const int> counts);

struct Interval {
    double low = 0.0;
    double high = 0.0;
};

struct ErrorReport {
    double eps_dark = 0.0;
    double eps_bright = 0.0;
    double eps = 0.0;  // (eps_dark + eps_bright)/2 exactly
    long n_dark = 0;
    long n_bright = 0;
    Interval ci_dark{};
    Interval ci_bright{};
    Interval ci{};
};

ErrorReport error_report(std::span<const int> predictions, std::span<const int> labels);

Interval wilson_interval(double p_hat, long n, double z = 1.959963984540054);

// quantum projection noise sigma = sqrt(p(1-p)/N)
double qpn_sigma(double p, long n);

}  // namespace shelvesim::classify
