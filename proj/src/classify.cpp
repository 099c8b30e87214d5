#include "shelvesim/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shelvesim::classify {

ThresholdModel fit_threshold(std::span<const double> values, std::span<const int> labels) {
    if (values.size() != labels.size() || values.empty())
        throw std::invalid_argument("fit_threshold: size mismatch or empty");

    long n_dark = 0, n_bright = 0;
    for (int l : labels) (l ? n_bright : n_dark)++;
    if (n_dark == 0 || n_bright == 0)
        throw std::invalid_argument("fit_threshold: both classes required in calibration");

    std::vector<std::pair<double, int>> sorted(values.size());
    for (size_t i = 0; i < values.size(); ++i) sorted[i] = {values[i], labels[i]};
    std::sort(sorted.begin(), sorted.end());

    // Sweep thresholds from below the minimum upward. At a threshold theta,
    // eps_d = dark above theta / n_dark, eps_b = bright at-or-below / n_bright.
    long dark_above = n_dark, bright_below = 0;
    double best_eps = 0.5 * (static_cast<double>(dark_above) / n_dark +
                             static_cast<double>(bright_below) / n_bright);
    double best_threshold = sorted.front().first - 1.0;

    size_t i = 0;
    while (i < sorted.size()) {
        // move every sample equal to sorted[i].first to the dark side
        const double v = sorted[i].first;
        while (i < sorted.size() && sorted[i].first == v) {
            if (sorted[i].second)
                ++bright_below;
            else
                --dark_above;
            ++i;
        }
        const double candidate =
            i < sorted.size() ? 0.5 * (v + sorted[i].first) : sorted.back().first + 1.0;
        const double eps = 0.5 * (static_cast<double>(dark_above) / n_dark +
                                  static_cast<double>(bright_below) / n_bright);
        if (eps <= best_eps) {  // ties broken toward the larger threshold
            best_eps = eps;
            best_threshold = candidate;
        }
    }
    return ThresholdModel{best_threshold};
}

namespace {

double log_poisson_pmf(int n, double lambda) {
    if (lambda <= 0.0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return n * std::log(lambda) - lambda - std::lgamma(n + 1.0);
}

double log_sum_exp(std::span<const double> terms) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double t : terms) hi = std::max(hi, t);
    if (!std::isfinite(hi)) return hi;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - hi);
    return hi + std::log(sum);
}

}  // namespace

double subbin_log_likelihood(const SubbinModel& m, std::span<const int> counts, Hypothesis h) {
    if (m.k < 1 || static_cast<int>(counts.size()) != m.k)
        throw std::invalid_argument("subbin: counts length must equal k");
    if (m.subbin_s <= 0.0) throw std::domain_error("subbin: Delta must be > 0");
    if (m.lambda_bright < 0.0 || m.lambda_dark < 0.0)
        throw std::domain_error("subbin: negative rates");
    for (int n : counts)
        if (n < 0) throw std::domain_error("subbin: negative counts");

    const bool bright = h == Hypothesis::Bright;
    const double tau = bright ? m.tau_bright_s : m.tau_dark_s;
    const double lam_pre = bright ? m.lambda_bright : m.lambda_dark;
    const double lam_post = bright ? m.lambda_dark : m.lambda_bright;
    const double lam_mid = 0.5 * (m.lambda_bright + m.lambda_dark);

    const bool leak = (bright || m.include_dark_leak) && std::isfinite(tau) && tau > 0.0;

    // per-bin log pmf under the three rate cases
    const int k = m.k;
    std::vector<double> lp_pre(k), lp_post(k), lp_mid(k);
    for (int i = 0; i < k; ++i) {
        lp_pre[i] = log_poisson_pmf(counts[i], lam_pre);
        lp_post[i] = log_poisson_pmf(counts[i], lam_post);
        lp_mid[i] = log_poisson_pmf(counts[i], lam_mid);
    }

    if (!leak) {
        double total = 0.0;
        for (int i = 0; i < k; ++i) total += lp_pre[i];
        return total;
    }

    // prefix/suffix sums so each mixture term is O(1)
    std::vector<double> pre_cum(k + 1, 0.0), post_cum(k + 1, 0.0);
    for (int i = 0; i < k; ++i) pre_cum[i + 1] = pre_cum[i] + lp_pre[i];
    for (int i = k - 1; i >= 0; --i) post_cum[i] = post_cum[i + 1] + lp_post[i];

    const double r = m.subbin_s / tau;
    std::vector<double> terms(k + 1);
    for (int j = 0; j < k; ++j) {
        const double log_w = std::log(std::exp(-j * r) - std::exp(-(j + 1) * r));
        terms[j] = log_w + pre_cum[j] + lp_mid[j] + post_cum[j + 1];
    }
    terms[k] = -k * r + pre_cum[k];
    return log_sum_exp(terms);
}

SubbinDecision classify_subbin(const SubbinModel& m, std::span<const int> counts) {
    if (m.prior_bright < 0.0 || m.prior_bright > 1.0)
        throw std::domain_error("subbin: prior outside [0,1]");
    const double lb = subbin_log_likelihood(m, counts, Hypothesis::Bright);
    const double ld = subbin_log_likelihood(m, counts, Hypothesis::Dark);

    SubbinDecision d;
    if (m.prior_bright == 0.0) {
        d.log_likelihood_ratio = -std::numeric_limits<double>::infinity();
    } else if (m.prior_bright == 1.0) {
        d.log_likelihood_ratio = std::numeric_limits<double>::infinity();
    } else {
        d.log_likelihood_ratio = lb - ld + std::log(m.prior_bright / (1.0 - m.prior_bright));
    }
    d.label = d.log_likelihood_ratio > 0.0 ? 1 : 0;
    return d;
}

Interval wilson_interval(double p_hat, long n, double z) {
    if (n <= 0) return {0.0, 1.0};
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p_hat + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

double qpn_sigma(double p, long n) {
    if (n <= 0) throw std::domain_error("qpn_sigma: n must be > 0");
    return std::sqrt(p * (1.0 - p) / n);
}

ErrorReport error_report(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw std::invalid_argument("error_report: size mismatch or empty");

    ErrorReport r;
    long wrong_dark = 0, wrong_bright = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) {
            ++r.n_bright;
            if (!predictions[i]) ++wrong_bright;
        } else {
            ++r.n_dark;
            if (predictions[i]) ++wrong_dark;
        }
    }
    if (r.n_dark == 0 || r.n_bright == 0)
        throw std::invalid_argument("error_report: both classes required");

    r.eps_dark = static_cast<double>(wrong_dark) / r.n_dark;
    r.eps_bright = static_cast<double>(wrong_bright) / r.n_bright;
    r.eps = (r.eps_dark + r.eps_bright) / 2.0;
    r.ci_dark = wilson_interval(r.eps_dark, r.n_dark);
    r.ci_bright = wilson_interval(r.eps_bright, r.n_bright);

    // half-widths combined in quadrature, halved by the averaging
    const double hd = 0.5 * (r.ci_dark.high - r.ci_dark.low);
    const double hb = 0.5 * (r.ci_bright.high - r.ci_bright.low);
    const double half = 0.5 * std::sqrt(hd * hd + hb * hb);
    r.ci = {std::max(0.0, r.eps - half), std::min(1.0, r.eps + half)};
    return r;
}

}  // namespace shelvesim::classify
