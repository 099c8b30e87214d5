#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "shelvesim/atomic.hpp"

using namespace shelvesim;
using namespace shelvesim::ion;

namespace {
const Level kS00{Term::S12, 0, 0};
const Level kS10{Term::S12, 1, 0};
const Level kD20{Term::D52, 2, 0};
const Level kD30{Term::D52, 3, 0};
}  // namespace

TEST_CASE("branching distributions normalize") {
    const auto c = AtomicConstants::defaults();
    c.validate();
    for (const DecayTable* t : {&c.d52_f3, &c.d52_f2}) {
        double sum = 0.0;
        for (double f : t->normalized_fractions()) sum += f;
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("clock transition at zero field is the bare line center") {
    const auto c = AtomicConstants::defaults();
    CHECK(transition_frequency(c, kS00, kD20, 0.0) == doctest::Approx(729.487752e12));
    CHECK(transition_frequency(c, kS10, kD30, 0.0) == doctest::Approx(729.474917e12));
}

TEST_CASE("quadratic shift on D5/2|3,0> at the experimental field") {
    const auto c = AtomicConstants::defaults();
    const double B = 440.9;
    const double shifted = transition_frequency(c, kS10, kD30, B);
    const double bare = transition_frequency(c, kS10, kD30, 0.0);
    // -0.350 Hz/uT^2 * B^2, both mF = 0 so no linear part
    // differencing two ~7.3e14 Hz values leaves ~0.1 Hz of cancellation noise
    CHECK(shifted - bare == doctest::Approx(-0.350 * B * B).epsilon(1e-4));
    CHECK(shifted - bare == doctest::Approx(-68032.8).epsilon(1e-4));
}

TEST_CASE("linear Zeeman shifts combine as upper minus lower") {
    const auto c = AtomicConstants::defaults();
    const double B = 100.0;
    const Level s_up{Term::S12, 1, 1};
    const Level d_up{Term::D52, 3, 2};
    const double f = transition_frequency(c, s_up, d_up, B);
    const double expect = 729.474917e12 + 13.96e3 * 2 * B - 13.98e3 * 1 * B;
    CHECK(f == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("zeeman shift difference negates when roles swap") {
    const auto c = AtomicConstants::defaults();
    const double B = 250.0;
    const Level a{Term::S12, 1, 1};
    const Level b{Term::D52, 3, 1};
    const double up = transition_frequency(c, a, b, B) - transition_frequency(c, a, b, 0.0);
    // swapping which level carries which coefficient negates the net shift
    const double swapped = (13.98e3 - 13.96e3) * B;
    CHECK(up == doctest::Approx(-swapped).epsilon(1e-9));
}

TEST_CASE("unsupported transitions and bad levels are rejected") {
    const auto c = AtomicConstants::defaults();
    CHECK_THROWS_AS(transition_frequency(c, kS00, kD30, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(transition_frequency(c, kS00, Level{Term::P12, 0, 0}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(transition_frequency(c, Level{Term::S12, 1, 2}, kD30, 0.0), std::domain_error);
}

TEST_CASE("760 nm line centers keyed by the F7/2 hyperfine label") {
    const auto c = AtomicConstants::defaults();
    CHECK(transition_frequency(c, Level{Term::F72, 4, 0}, Level{Term::B1D32, 2, 0}, 0.0) ==
          doctest::Approx(394.430203e12));
    CHECK(transition_frequency(c, Level{Term::F72, 3, 0}, Level{Term::B1D32, 2, 0}, 0.0) ==
          doctest::Approx(394.424943e12));
}

TEST_CASE("F7/2 never decays, S1/2 is an error") {
    const auto c = AtomicConstants::defaults();
    for (uint64_t s = 0; s < 100; ++s) {
        const auto ev = sample_decay(c, Level{Term::F72, 3, 0}, s);
        CHECK(ev.no_decay);
    }
    CHECK_THROWS_AS(sample_decay(c, kS00, uint64_t{1}), std::invalid_argument);
}

TEST_CASE("decay branching converges to the table at 1e6 draws") {
    const auto c = AtomicConstants::defaults();
    Rng rng(42);
    const int n = 1'000'000;
    int to_f72 = 0;
    double delay_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto ev = sample_decay(c, kD30, rng);
        if (ev.destination.term == Term::F72) ++to_f72;
        delay_sum += ev.delay_s;
    }
    const double p = 0.824;
    const double sigma = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(static_cast<double>(to_f72) / n - p) < 3 * sigma);

    // exponential mean: sd of the sample mean is tau/sqrt(n)
    const double tau = 7.1e-3;
    CHECK(std::abs(delay_sum / n - tau) < 3 * tau / std::sqrt(n));
}

TEST_CASE("D5/2|2> three-way branching at 1e6 draws") {
    const auto c = AtomicConstants::defaults();
    Rng rng(7);
    const int n = 1'000'000;
    int counts[3] = {0, 0, 0};
    double delay_sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto ev = sample_decay(c, kD20, rng);
        if (ev.destination.term == Term::F72)
            ++counts[2];
        else if (ev.destination.F == 0)
            ++counts[0];
        else
            ++counts[1];
        delay_sum += ev.delay_s;
    }
    const double norm = 0.111 + 0.074 + 0.816;
    const double expect[3] = {0.111 / norm, 0.074 / norm, 0.816 / norm};
    for (int j = 0; j < 3; ++j) {
        const double sigma = std::sqrt(expect[j] * (1 - expect[j]) / n);
        CHECK(std::abs(static_cast<double>(counts[j]) / n - expect[j]) < 3 * sigma);
    }
    const double tau = 7.4e-3;
    CHECK(std::abs(delay_sum / n - tau) < 3 * tau / std::sqrt(n));
}

TEST_CASE("sampled delays pass a KS test against the exponential") {
    const auto c = AtomicConstants::defaults();
    Rng rng(1234);
    const int n = 100'000;
    std::vector<double> delays(n);
    for (auto& d : delays) d = sample_decay(c, kD30, rng).delay_s;
    std::sort(delays.begin(), delays.end());

    const double tau = 7.1e-3;
    double d_stat = 0.0;
    for (int i = 0; i < n; ++i) {
        const double cdf = 1.0 - std::exp(-delays[i] / tau);
        d_stat = std::max(d_stat, std::abs(cdf - (i + 1.0) / n));
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n));
    }
    // 1% critical value: 1.628 / sqrt(n)
    CHECK(d_stat < 1.628 / std::sqrt(static_cast<double>(n)));
}
