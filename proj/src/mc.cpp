#include "shelvesim/mc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace shelvesim::mc {

void ProtocolConfig::validate() const {
    if (bright_rate_hz < 0.0 || background_rate_hz < 0.0)
        throw std::domain_error("config: rates must be >= 0");
    if (detection_time_s <= 0.0) throw std::domain_error("config: detection time must be > 0");
    if (shelving_error < 0.0 || shelving_error > 1.0)
        throw std::domain_error("config: shelving error outside [0,1]");
    if (subbins < 1) throw std::domain_error("config: subbins must be >= 1");
    if (kind == ProtocolKind::Standard) {
        if (shelf_level.has_value())
            throw std::domain_error("config: Standard protocol with shelf parameters set");
        if (tau_bright_s <= 0.0 || tau_dark_s <= 0.0)
            throw std::domain_error("config: leak times must be > 0");
    }
    if (kind == ProtocolKind::D52Shelved) {
        if (!shelf_level.has_value() || shelf_level->term != ion::Term::D52)
            throw std::domain_error("config: D52Shelved requires a D5/2 shelf level");
    }
}

ProtocolConfig ProtocolConfig::standard(double detection_time_s) {
    ProtocolConfig c;
    c.kind = ProtocolKind::Standard;
    c.detection_time_s = detection_time_s;
    return c;
}

ProtocolConfig ProtocolConfig::d52_shelved(double detection_time_s) {
    ProtocolConfig c;
    c.kind = ProtocolKind::D52Shelved;
    c.detection_time_s = detection_time_s;
    c.shelf_level = ion::Level{ion::Term::D52, 2, 0};
    c.shelving_error = 0.007;  // five-pulse residual
    c.tau_bright_s = std::numeric_limits<double>::infinity();
    c.tau_dark_s = std::numeric_limits<double>::infinity();
    return c;
}

ProtocolConfig ProtocolConfig::f72_shelved(double detection_time_s, double pump_failure) {
    ProtocolConfig c;
    c.kind = ProtocolKind::F72Shelved;
    c.detection_time_s = detection_time_s;
    c.shelving_error = pump_failure;
    c.tau_bright_s = std::numeric_limits<double>::infinity();
    c.tau_dark_s = std::numeric_limits<double>::infinity();
    return c;
}

namespace {

bool finite_leak(double tau) { return std::isfinite(tau) && tau > 0.0; }

// Build the hidden-state trajectory for one trial. All RNG draws for the
// trajectory happen before any photon draws so the stream layout is fixed.
void build_trajectory(const ion::AtomicConstants& atoms, const ProtocolConfig& cfg,
                      bool prepared_bright, Rng& rng, TimeTagStream& out) {
    const double T = cfg.detection_time_s;
    double t = 0.0;
    InternalState state;

    switch (cfg.kind) {
        case ProtocolKind::Standard:
            state = prepared_bright ? InternalState{StateKind::BrightScattering, {}}
                                    : InternalState{StateKind::DarkQubit, {}};
            break;
        case ProtocolKind::D52Shelved:
            if (prepared_bright) {
                state = {StateKind::BrightScattering, {}};
            } else if (rng.uniform() < cfg.shelving_error) {
                state = {StateKind::BrightScattering, {}};
            } else {
                state = {StateKind::ShelvedD, *cfg.shelf_level};
            }
            break;
        case ProtocolKind::F72Shelved:
            if (prepared_bright) {
                state = {StateKind::BrightScattering, {}};
            } else if (rng.uniform() < cfg.shelving_error) {
                state = {StateKind::BrightScattering, {}};
            } else {
                state = {StateKind::ShelvedF, {}};
            }
            break;
    }

    out.trajectory.push_back({0.0, state});

    // event-driven evolution until the window closes
    while (t < T) {
        switch (state.kind) {
            case StateKind::BrightScattering: {
                if (cfg.kind != ProtocolKind::Standard || !finite_leak(cfg.tau_bright_s)) return;
                t += rng.exponential(cfg.tau_bright_s);
                if (t >= T) return;
                state = {StateKind::DarkQubit, {}};
                out.trajectory.push_back({t, state});
                break;
            }
            case StateKind::DarkQubit: {
                if (!finite_leak(cfg.tau_dark_s)) return;
                t += rng.exponential(cfg.tau_dark_s);
                if (t >= T) return;
                state = {StateKind::BrightScattering, {}};
                out.trajectory.push_back({t, state});
                break;
            }
            case StateKind::ShelvedD: {
                const auto ev = ion::sample_decay(atoms, state.level, rng);
                t += ev.delay_s;
                if (t >= T) return;
                if (ev.destination.term == ion::Term::F72) {
                    state = {StateKind::ShelvedF, {}};
                } else {
                    // all S1/2 levels scatter under shelved detection
                    state = {StateKind::BrightScattering, {}};
                }
                out.trajectory.push_back({t, state});
                break;
            }
            case StateKind::ShelvedF:
                return;
        }
    }
}

}  // namespace

TimeTagStream simulate_trial(const ion::AtomicConstants& atoms, const ProtocolConfig& cfg,
                             bool prepared_bright, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);

    TimeTagStream out;
    out.prepared_bright = prepared_bright;
    out.window_s = cfg.detection_time_s;
    build_trajectory(atoms, cfg, prepared_bright, rng, out);

    // piecewise-constant Poisson process over the trajectory segments
    const double T = cfg.detection_time_s;
    for (size_t i = 0; i < out.trajectory.size(); ++i) {
        const double seg_start = out.trajectory[i].time_s;
        const double seg_end = (i + 1 < out.trajectory.size()) ? out.trajectory[i + 1].time_s : T;
        const bool scattering = out.trajectory[i].state.kind == StateKind::BrightScattering;
        const double rate =
            cfg.background_rate_hz + (scattering ? cfg.bright_rate_hz : 0.0);
        if (rate <= 0.0) continue;
        double t = seg_start + rng.exponential(1.0 / rate);
        while (t < seg_end) {
            out.tags.push_back(t);
            t += rng.exponential(1.0 / rate);
        }
    }
    return out;
}

std::vector<int> bin_counts(const TimeTagStream& s, int k) {
    if (k < 1) throw std::domain_error("bin_counts: k must be >= 1");
    std::vector<int> counts(k, 0);
    const double width = s.window_s / k;
    for (double tag : s.tags) {
        int idx = static_cast<int>(tag / width);
        if (idx >= k) idx = k - 1;  // tag exactly at the window edge
        ++counts[idx];
    }
    return counts;
}

TrialDataset run_batch(const ion::AtomicConstants& atoms, const ProtocolConfig& cfg,
                       int n_dark, int n_bright, const BatchSchedule& schedule, uint64_t seed,
                       int threads) {
    if (n_dark < 0 || n_bright < 0) throw std::domain_error("run_batch: negative trial count");
    if (n_dark + n_bright > 0) cfg.validate();

    // label sequence per schedule, dark first
    std::vector<char> bright_label;
    bright_label.reserve(n_dark + n_bright);
    int remaining_dark = n_dark, remaining_bright = n_bright;
    const int block = schedule.kind == BatchSchedule::Kind::Blocks ? schedule.block_size : 1;
    if (block < 1) throw std::domain_error("run_batch: block size must be >= 1");
    bool bright_turn = false;
    while (remaining_dark > 0 || remaining_bright > 0) {
        int& pool = bright_turn ? remaining_bright : remaining_dark;
        if (pool == 0) {
            bright_turn = !bright_turn;
            continue;
        }
        const int take = std::min(block, pool);
        bright_label.insert(bright_label.end(), take, bright_turn ? 1 : 0);
        pool -= take;
        bright_turn = !bright_turn;
    }

    TrialDataset ds;
    ds.config = cfg;
    ds.master_seed = seed;
    ds.trials.resize(bright_label.size());

    auto worker = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i)
            ds.trials[i] =
                simulate_trial(atoms, cfg, bright_label[i] != 0, derive_seed(seed, i));
    };

    const size_t n = ds.trials.size();
    if (threads <= 1 || n < 64) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const size_t chunk = (n + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const size_t begin = std::min(n, t * chunk);
            const size_t end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    return ds;
}

}  // namespace shelvesim::mc
