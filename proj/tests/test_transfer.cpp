#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "shelvesim/transfer.hpp"

using namespace shelvesim::transfer;

TEST_CASE("zero dephasing reduces to the bare Landau-Zener formula") {
    RapParams p{19e3, 0.0, 1e9};
    const double x = M_PI * M_PI * 19e3 * 19e3 / 1e9;
    CHECK(rap_probability(p) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
}

TEST_CASE("infinitely fast sweep transfers nothing") {
    RapParams p{19e3, 2.6e3, 1e18};
    CHECK(rap_probability(p) < 1e-8);
}

TEST_CASE("probability stays in [0,1] and rejects bad parameters") {
    for (double omega : {1e3, 19e3, 2.5e6})
        for (double gamma : {0.0, 10.0, 2.6e3, 1e5})
            for (double alpha : {1e3, 1e6, 1e9, 1e15}) {
                const double p = rap_probability({omega, gamma, alpha});
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
            }
    CHECK_THROWS_AS(rap_probability({19e3, 2.6e3, 0.0}), std::domain_error);
    CHECK_THROWS_AS(rap_probability({0.0, 2.6e3, 1e9}), std::domain_error);
    CHECK_THROWS_AS(rap_probability({19e3, -1.0, 1e9}), std::domain_error);
}

TEST_CASE("monotone in dephasing and in Rabi frequency") {
    const double alpha = 3e8;
    double prev = 1.0;
    for (double gamma : {0.0, 1e2, 1e3, 5e3, 2e4}) {
        const double p = rap_probability({19e3, gamma, alpha});
        CHECK(p <= prev + 1e-12);
        prev = p;
    }
    // the achievable maximum improves with Rabi frequency
    prev = 0.0;
    for (double omega : {1e3, 5e3, 2e4, 1e5}) {
        const double p = rap_max_transfer(omega, 2.6e3).probability;
        CHECK(p >= prev - 1e-12);
        prev = p;
    }
}

TEST_CASE("optimum matches the analytic stationary point") {
    // d/dx of the transfer probability vanishes at x* = ln((1 + 2g)/g)
    for (double g : {0.01, 0.1369, 0.5, 2.0, 20.0}) {
        const double omega = 19e3;
        const double gamma = g * omega;
        const auto opt = rap_max_transfer(omega, gamma);
        const double x_star = std::log((1.0 + 2.0 * g) / g);
        const double damp = std::exp(-2.0 * g * x_star);
        const double p_star = 0.5 * (1.0 - damp) + damp * (1.0 - std::exp(-x_star));
        CHECK(opt.probability == doctest::Approx(p_star).epsilon(1e-9));
        // for g = 20 the peak is flat to machine precision (P - 1/2 ~ 1e-15),
        // so alpha is only identifiable at moderate dephasing
        if (g <= 2.0) {
            const double alpha_star = M_PI * M_PI * omega * omega / x_star;
            CHECK(opt.sweep_rate_hz_s == doctest::Approx(alpha_star).epsilon(1e-6));
        }
    }
}

TEST_CASE("maximum transfer depends only on the ratio Gamma/Omega") {
    const auto a = rap_max_transfer(19e3, 2.6e3);
    for (double c : {0.001, 0.1, 10.0, 1e4}) {
        const auto b = rap_max_transfer(c * 19e3, c * 2.6e3);
        CHECK(b.probability == doctest::Approx(a.probability).epsilon(1e-6));
    }
}

TEST_CASE("experimental parameters give the published maximum") {
    CHECK(rap_max_transfer(19e3, 2.6e3).probability == doctest::Approx(0.72).epsilon(0.015));
    CHECK(rap_max_transfer(19e3, 2.0).probability >= 0.99);
    CHECK(rap_max_transfer(2.5e6, 2.6e3).probability >= 0.99);
}

TEST_CASE("fully dephased limit approaches one half") {
    CHECK(rap_max_transfer(19e3, 19e7).probability == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("zero dephasing flags an unbounded optimum") {
    const auto opt = rap_max_transfer(19e3, 0.0);
    CHECK(opt.unbounded);
    CHECK(opt.probability == 1.0);
}

TEST_CASE("coherence time to dephasing rate") {
    CHECK(coherence_to_gamma(0.392e-3) == doctest::Approx(2551.0).epsilon(1e-3));
    CHECK(coherence_to_gamma(1e-3) == doctest::Approx(1e3));
    CHECK(coherence_to_gamma(1e12) < 1e-11);
    CHECK_THROWS_AS(coherence_to_gamma(0.0), std::domain_error);
}

TEST_CASE("sequence residual is the product of per-pulse leftovers") {
    CHECK(sequence_residual({{0.939}}).residual == doctest::Approx(0.061));
    CHECK(sequence_residual({{0.0, 0.0, 0.0}}).residual == doctest::Approx(1.0));
    CHECK_THROWS_AS(sequence_residual({{}}), std::domain_error);
    CHECK_THROWS_AS(sequence_residual({{1.2}}), std::domain_error);
}

TEST_CASE("sequence residual is permutation invariant and monotone") {
    const PulseSequence seq{{0.9, 0.3, 0.6}};
    const PulseSequence perm{{0.3, 0.6, 0.9}};
    CHECK(sequence_residual(seq).residual ==
          doctest::Approx(sequence_residual(perm).residual).epsilon(1e-14));
    const auto traj = sequence_residual(seq).trajectory;
    for (size_t i = 1; i < traj.size(); ++i) CHECK(traj[i] <= traj[i - 1] + 1e-15);
}

TEST_CASE("calibrated sequences hit both measured endpoints") {
    const auto seq3 = calibrate_sequence(0.061, 0.016, 3);
    const auto r3 = sequence_residual(seq3);
    CHECK(r3.trajectory.front() == doctest::Approx(0.061).epsilon(1e-12));
    CHECK(r3.residual == doctest::Approx(0.016).epsilon(1e-12));
    for (size_t i = 1; i < r3.trajectory.size(); ++i)
        CHECK(r3.trajectory[i] < r3.trajectory[i - 1]);

    const auto seq5 = calibrate_sequence(0.021, 0.007, 5);
    const auto r5 = sequence_residual(seq5);
    CHECK(r5.trajectory.front() == doctest::Approx(0.021).epsilon(1e-12));
    CHECK(r5.residual == doctest::Approx(0.007).epsilon(1e-12));
}

TEST_CASE("incoherent pump model") {
    const auto m = PumpModel::from_target(0.999, 100e-3);
    CHECK(m.tau_pump_s == doctest::Approx(100e-3 / std::log(1000.0)).epsilon(1e-12));
    CHECK(incoherent_pump_probability(0.0, m) == 0.0);
    CHECK(incoherent_pump_probability(100e-3, m) == doctest::Approx(0.999).epsilon(1e-12));
    CHECK(incoherent_pump_probability(m.tau_pump_s, m) ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(incoherent_pump_probability(-1.0, m), std::domain_error);
}
