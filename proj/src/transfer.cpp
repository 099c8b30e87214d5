#include "shelvesim/transfer.hpp"

#include <cmath>
#include <stdexcept>

namespace shelvesim::transfer {

namespace {
constexpr double kPi = 3.14159265358979323846;

// transfer probability as a function of x = pi^2 Omega^2 / alpha, with
// g = Gamma/Omega
double probability_x(double x, double g) {
    const double damp = std::exp(-2.0 * g * x);
    return 0.5 * (1.0 - damp) + damp * (1.0 - std::exp(-x));
}
}  // namespace

double rap_probability(const RapParams& p) {
    if (p.rabi_hz <= 0.0) throw std::domain_error("rap_probability: Omega must be > 0");
    if (p.dephasing_hz < 0.0) throw std::domain_error("rap_probability: Gamma must be >= 0");
    if (p.sweep_rate_hz_s <= 0.0) throw std::domain_error("rap_probability: alpha must be > 0");
    const double x = kPi * kPi * p.rabi_hz * p.rabi_hz / p.sweep_rate_hz_s;
    return probability_x(x, p.dephasing_hz / p.rabi_hz);
}

RapOptimum rap_max_transfer(double rabi_hz, double dephasing_hz) {
    if (rabi_hz <= 0.0) throw std::domain_error("rap_max_transfer: Omega must be > 0");
    if (dephasing_hz < 0.0) throw std::domain_error("rap_max_transfer: Gamma must be >= 0");

    RapOptimum opt;
    if (dephasing_hz == 0.0) {
        // P is monotone in x; the supremum 1 is approached as alpha -> 0
        opt.unbounded = true;
        opt.probability = 1.0;
        opt.sweep_rate_hz_s = 0.0;
        return opt;
    }

    const double g = dephasing_hz / rabi_hz;

    // golden-section maximization over ln x; the bracket comfortably contains
    // the single interior stationary point for any g > 0
    double lo = std::log(1e-12);
    double hi = std::log(std::max(1e3, 1e3 / g));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = probability_x(std::exp(c), g);
    double fd = probability_x(std::exp(d), g);
    while (b - a > 1e-12) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = probability_x(std::exp(c), g);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = probability_x(std::exp(d), g);
        }
    }
    const double x_opt = std::exp(0.5 * (a + b));
    opt.probability = probability_x(x_opt, g);
    opt.sweep_rate_hz_s = kPi * kPi * rabi_hz * rabi_hz / x_opt;
    return opt;
}

double coherence_to_gamma(double coherence_time_s) {
    if (coherence_time_s <= 0.0) throw std::domain_error("coherence_to_gamma: T must be > 0");
    return 1.0 / coherence_time_s;
}

SequenceResidual sequence_residual(const PulseSequence& seq) {
    if (seq.efficiencies.empty()) throw std::domain_error("sequence_residual: empty sequence");
    SequenceResidual out;
    out.trajectory.reserve(seq.efficiencies.size());
    double residual = 1.0;
    for (double f : seq.efficiencies) {
        if (f < 0.0 || f > 1.0) throw std::domain_error("sequence_residual: efficiency outside [0,1]");
        residual *= 1.0 - f;
        out.trajectory.push_back(residual);
    }
    out.residual = residual;
    return out;
}

PulseSequence calibrate_sequence(double residual_first, double residual_last, int n_pulses) {
    if (n_pulses < 1) throw std::domain_error("calibrate_sequence: need >= 1 pulse");
    if (residual_first <= 0.0 || residual_first > 1.0 || residual_last <= 0.0 ||
        residual_last > residual_first)
        throw std::domain_error("calibrate_sequence: endpoints must satisfy 0 < rn <= r1 <= 1");

    PulseSequence seq;
    seq.efficiencies.push_back(1.0 - residual_first);
    if (n_pulses > 1) {
        const double ratio = residual_last / residual_first;
        const double f = 1.0 - std::pow(ratio, 1.0 / (n_pulses - 1));
        seq.efficiencies.insert(seq.efficiencies.end(), n_pulses - 1, f);
    }
    return seq;
}

PumpModel PumpModel::from_target(double target, double t_s) {
    if (target <= 0.0 || target >= 1.0) throw std::domain_error("pump: target must be in (0,1)");
    if (t_s <= 0.0) throw std::domain_error("pump: time must be > 0");
    PumpModel m;
    m.p_inf = 1.0;
    m.tau_pump_s = -t_s / std::log(1.0 - target);
    return m;
}

double incoherent_pump_probability(double t_s, const PumpModel& m) {
    if (t_s < 0.0) throw std::domain_error("pump: time must be >= 0");
    if (m.tau_pump_s <= 0.0) throw std::domain_error("pump: tau must be > 0");
    if (m.p_inf < 0.0 || m.p_inf > 1.0) throw std::domain_error("pump: p_inf outside [0,1]");
    return m.p_inf * (1.0 - std::exp(-t_s / m.tau_pump_s));
}

}  // namespace shelvesim::transfer
