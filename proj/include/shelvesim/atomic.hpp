#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shelvesim/rng.hpp"

namespace shelvesim::ion {

enum class Term { S12, P12, D32, D52, F72, B1D32 };

std::string term_name(Term t);

struct Level {
    Term term;
    int F;
    int mF;

    bool operator==(const Level&) const = default;
};

void validate_level(const Level& level);

struct Uncertain {
    double value = 0.0;
    double sigma = 0.0;
};

struct Branch {
    Level destination;
    Uncertain fraction;
};

struct DecayTable {
    Uncertain lifetime_s;
    std::vector<Branch> branches;

    // fractions rescaled to sum to exactly 1
    std::vector<double> normalized_fractions() const;
};

// Measured parameters for the shelving transitions (frequencies in Hz,
// Zeeman coefficients in Hz/uT, lifetimes in seconds).
struct AtomicConstants {
    Uncertain f_411_clock_s0_d2;   // S1/2|0,0> <-> D5/2|2,0>
    Uncertain f_411_s1_d3;         // S1/2|1,0> <-> D5/2|3,0>
    Uncertain f_760_after_d3;      // F7/2 repump center after preparing D5/2|3,0>
    Uncertain f_760_after_d2;      // F7/2 repump center after preparing D5/2|2,0>
    Uncertain hyperfine_a_d52_hz;

    Uncertain zeeman_s12_hz_per_ut;     // per unit mF
    Uncertain zeeman_d52_f3_hz_per_ut;  // per unit mF
    Uncertain zeeman_d52_f2_hz_per_ut;  // per unit mF
    Uncertain quad_zeeman_d52_f3m0_hz_per_ut2;

    DecayTable d52_f3;
    DecayTable d52_f2;

    static AtomicConstants defaults();
    void validate() const;

    const DecayTable* decay_table(const Level& source) const;
};

struct DecayEvent {
    double delay_s = 0.0;
    Level destination{};
    bool no_decay = false;  // F7/2 sentinel: no decay within any horizon
};

// Line center plus linear (and, for D5/2|3,0>, quadratic) Zeeman shifts.
double transition_frequency(const AtomicConstants& c, const Level& lower, const Level& upper,
                            double field_ut);

DecayEvent sample_decay(const AtomicConstants& c, const Level& source, Rng& rng);
DecayEvent sample_decay(const AtomicConstants& c, const Level& source, uint64_t seed);

}  // namespace shelvesim::ion
