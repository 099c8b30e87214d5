#include "shelvesim/atomic.hpp"

#include <cmath>
#include <stdexcept>

namespace shelvesim::ion {

std::string term_name(Term t) {
    switch (t) {
        case Term::S12: return "S1/2";
        case Term::P12: return "P1/2";
        case Term::D32: return "D3/2";
        case Term::D52: return "D5/2";
        case Term::F72: return "F7/2";
        case Term::B1D32: return "[1]D3/2";
    }
    return "?";
}

void validate_level(const Level& level) {
    if (level.F < 0) throw std::domain_error("level: negative F");
    if (std::abs(level.mF) > level.F) throw std::domain_error("level: |mF| exceeds F");
    if (level.term == Term::D52 && level.F != 2 && level.F != 3)
        throw std::domain_error("level: D5/2 has F in {2,3}");
    if (level.term == Term::S12 && level.F != 0 && level.F != 1)
        throw std::domain_error("level: S1/2 has F in {0,1}");
}

std::vector<double> DecayTable::normalized_fractions() const {
    double sum = 0.0;
    for (const auto& b : branches) sum += b.fraction.value;
    if (sum <= 0.0) throw std::domain_error("decay table: empty branching");
    std::vector<double> out;
    out.reserve(branches.size());
    for (const auto& b : branches) out.push_back(b.fraction.value / sum);
    return out;
}

AtomicConstants AtomicConstants::defaults() {
    AtomicConstants c;
    c.f_411_clock_s0_d2 = {729.487752e12, 177e6};
    c.f_411_s1_d3 = {729.474917e12, 177e6};
    c.f_760_after_d3 = {394.430203e12, 16e6};
    c.f_760_after_d2 = {394.424943e12, 20e6};
    c.hyperfine_a_d52_hz = {-63.368e6, 1e3};

    c.zeeman_s12_hz_per_ut = {13.98e3, 10.0};
    c.zeeman_d52_f3_hz_per_ut = {13.96e3, 20.0};
    c.zeeman_d52_f2_hz_per_ut = {19.61e3, 30.0};
    c.quad_zeeman_d52_f3m0_hz_per_ut2 = {-0.350, 0.001};

    // Decays from D5/2|F> land in F7/2 or S1/2; the F7/2 destination is
    // bookkept as |F+1> for consistency with the 760 nm line selection.
    c.d52_f3.lifetime_s = {7.1e-3, 0.4e-3};
    c.d52_f3.branches = {
        {Level{Term::S12, 1, 0}, {0.176, 0.004}},
        {Level{Term::F72, 4, 0}, {0.824, 0.004}},
    };
    c.d52_f2.lifetime_s = {7.4e-3, 0.4e-3};
    c.d52_f2.branches = {
        {Level{Term::S12, 0, 0}, {0.111, 0.003}},
        {Level{Term::S12, 1, 0}, {0.074, 0.003}},
        {Level{Term::F72, 3, 0}, {0.816, 0.004}},
    };
    return c;
}

void AtomicConstants::validate() const {
    for (const DecayTable* t : {&d52_f3, &d52_f2}) {
        if (t->lifetime_s.value <= 0.0) throw std::domain_error("constants: lifetime must be > 0");
        if (t->lifetime_s.sigma < 0.0) throw std::domain_error("constants: negative uncertainty");
        double sum = 0.0;
        const auto norm = t->normalized_fractions();
        for (double f : norm) sum += f;
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::domain_error("constants: branching does not normalize");
    }
}

const DecayTable* AtomicConstants::decay_table(const Level& source) const {
    if (source.term != Term::D52) return nullptr;
    return source.F == 3 ? &d52_f3 : &d52_f2;
}

namespace {

double linear_coeff(const AtomicConstants& c, const Level& level) {
    switch (level.term) {
        case Term::S12: return c.zeeman_s12_hz_per_ut.value;
        case Term::D52:
            return level.F == 3 ? c.zeeman_d52_f3_hz_per_ut.value
                                : c.zeeman_d52_f2_hz_per_ut.value;
        default: return 0.0;  // no tabulated coefficient
    }
}

double zeeman_shift(const AtomicConstants& c, const Level& level, double field_ut) {
    double shift = linear_coeff(c, level) * level.mF * field_ut;
    if (level.term == Term::D52 && level.F == 3 && level.mF == 0)
        shift += c.quad_zeeman_d52_f3m0_hz_per_ut2.value * field_ut * field_ut;
    return shift;
}

}  // namespace

double transition_frequency(const AtomicConstants& c, const Level& lower, const Level& upper,
                            double field_ut) {
    validate_level(lower);
    validate_level(upper);
    if (field_ut < 0.0) throw std::domain_error("transition_frequency: negative field");

    double base;
    if (lower.term == Term::S12 && upper.term == Term::D52) {
        if (lower.F == 0 && upper.F == 2)
            base = c.f_411_clock_s0_d2.value;
        else if (lower.F == 1 && upper.F == 3)
            base = c.f_411_s1_d3.value;
        else
            throw std::invalid_argument("unsupported transition");
    } else if (lower.term == Term::F72 && upper.term == Term::B1D32) {
        if (lower.F == 4)
            base = c.f_760_after_d3.value;
        else if (lower.F == 3)
            base = c.f_760_after_d2.value;
        else
            throw std::invalid_argument("unsupported transition");
    } else {
        throw std::invalid_argument("unsupported transition");
    }

    return base + zeeman_shift(c, upper, field_ut) - zeeman_shift(c, lower, field_ut);
}

DecayEvent sample_decay(const AtomicConstants& c, const Level& source, Rng& rng) {
    if (source.term == Term::F72) {
        // lifetime > 5 years, modeled as non-decaying
        return DecayEvent{0.0, source, true};
    }
    const DecayTable* table = c.decay_table(source);
    if (table == nullptr) throw std::invalid_argument("sample_decay: stable state");

    DecayEvent ev;
    ev.delay_s = rng.exponential(table->lifetime_s.value);
    const auto weights = table->normalized_fractions();
    ev.destination = table->branches[rng.discrete(weights)].destination;
    return ev;
}

DecayEvent sample_decay(const AtomicConstants& c, const Level& source, uint64_t seed) {
    Rng rng(seed);
    return sample_decay(c, source, rng);
}

}  // namespace shelvesim::ion
