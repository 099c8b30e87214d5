#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "shelvesim/atomic.hpp"

namespace shelvesim::mc {

enum class ProtocolKind { Standard, D52Shelved, F72Shelved };

enum class StateKind { BrightScattering, DarkQubit, ShelvedD, ShelvedF };

struct InternalState {
    StateKind kind = StateKind::BrightScattering;
    ion::Level level{};  // populated for ShelvedD

    bool operator==(const InternalState&) const = default;
};

struct ProtocolConfig {
    ProtocolKind kind = ProtocolKind::Standard;
    double bright_rate_hz = 100e3;     // detected scatter rate while bright
    double background_rate_hz = 2e3;
    double tau_bright_s = 2e-3;        // bright -> dark leak (Standard only)
    double tau_dark_s = 30e-3;         // dark -> bright leak (Standard only)
    std::optional<ion::Level> shelf_level;  // D52Shelved target
    double shelving_error = 0.0;       // probability the shelf/pump leaves the ion scattering
    double detection_time_s = 0.0;
    int subbins = 1;

    void validate() const;

    static ProtocolConfig standard(double detection_time_s);
    static ProtocolConfig d52_shelved(double detection_time_s);
    static ProtocolConfig f72_shelved(double detection_time_s, double pump_failure);
};

struct Transition {
    double time_s = 0.0;
    InternalState state{};
};

struct TimeTagStream {
    std::vector<double> tags;  // sorted arrival times in [0, window_s)
    bool prepared_bright = false;
    double window_s = 0.0;
    std::vector<Transition> trajectory;  // starts at t = 0
};

TimeTagStream simulate_trial(const ion::AtomicConstants& atoms, const ProtocolConfig& config,
                             bool prepared_bright, uint64_t seed);

std::vector<int> bin_counts(const TimeTagStream& s, int k);

struct BatchSchedule {
    enum class Kind { Interleave, Blocks };
    Kind kind = Kind::Interleave;
    int block_size = 1;

    static BatchSchedule interleave() { return {Kind::Interleave, 1}; }
    static BatchSchedule blocks(int m) { return {Kind::Blocks, m}; }
};

struct TrialDataset {
    ProtocolConfig config;
    uint64_t master_seed = 0;
    std::vector<TimeTagStream> trials;
};

// Deterministic batch: per-trial seeds derive from (master_seed, index), so
// the output is identical for any thread count.
TrialDataset run_batch(const ion::AtomicConstants& atoms, const ProtocolConfig& config,
                       int n_dark, int n_bright, const BatchSchedule& schedule, uint64_t seed,
                       int threads = 1);

}  // namespace shelvesim::mc
