#pragma once

#include <vector>

namespace shelvesim::transfer {

struct RapParams {
    double rabi_hz = 0.0;        // Omega
    double dephasing_hz = 0.0;   // Gamma, inverse laser coherence time
    double sweep_rate_hz_s = 0.0;  // alpha
};

// Landau-Zener transfer under a Markovian dephasing bath:
//   P = 1/2 (1 - e^(-2 pi^2 Gamma Omega / alpha))
//     + e^(-2 pi^2 Gamma Omega / alpha) (1 - e^(-pi^2 Omega^2 / alpha))
double rap_probability(const RapParams& p);

struct RapOptimum {
    double sweep_rate_hz_s = 0.0;
    double probability = 0.0;
    bool unbounded = false;  // Gamma = 0: supremum 1 approached as alpha -> 0
};

// Maximizes rap_probability over the sweep rate. The optimum depends only on
// the ratio Gamma/Omega.
RapOptimum rap_max_transfer(double rabi_hz, double dephasing_hz);

double coherence_to_gamma(double coherence_time_s);

struct PulseSequence {
    std::vector<double> efficiencies;  // per-pulse transfer fractions in [0,1]
};

struct SequenceResidual {
    double residual = 1.0;                 // population left in the source manifold
    std::vector<double> trajectory;        // residual after each pulse
};

SequenceResidual sequence_residual(const PulseSequence& seq);

// Solves for a constant follow-up efficiency so the residual trajectory hits
// both measured endpoints: residual r1 after the first pulse, rn after n.
PulseSequence calibrate_sequence(double residual_first, double residual_last, int n_pulses);

struct PumpModel {
    double p_inf = 1.0;
    double tau_pump_s = 0.0;

    // calibrated so the transfer reaches `target` at time `t`
    static PumpModel from_target(double target, double t_s);
};

double incoherent_pump_probability(double t_s, const PumpModel& m);

}  // namespace shelvesim::transfer
