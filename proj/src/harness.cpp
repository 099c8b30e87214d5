#include "shelvesim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "shelvesim/peakfit.hpp"
#include "shelvesim/rng.hpp"
#include "shelvesim/transfer.hpp"

namespace shelvesim::harness {

using nlohmann::json;

std::string detector_name(Detector d) { return d == Detector::Apd ? "apd" : "emccd"; }

std::string analysis_name(Analysis a) {
    switch (a) {
        case Analysis::Threshold: return "threshold";
        case Analysis::Subbin: return "subbin";
        case Analysis::Classifier: return "classifier";
    }
    return "?";
}

std::string protocol_name(mc::ProtocolKind k) {
    switch (k) {
        case mc::ProtocolKind::Standard: return "standard";
        case mc::ProtocolKind::D52Shelved: return "d52";
        case mc::ProtocolKind::F72Shelved: return "f72";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (times_s.empty()) throw std::invalid_argument("config: time grid is empty");
    for (double t : times_s)
        if (t <= 0.0) throw std::invalid_argument("config: nonpositive detection time");
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw std::invalid_argument("config: split fraction outside (0,1)");
    if (resamples < 1) throw std::invalid_argument("config: resample count must be >= 1");
    const double min_trials = 20.0 / split_fraction;
    if (n_dark + n_bright < min_trials)
        throw std::invalid_argument("config: too few trials for the split fraction");
    if (n_dark < 1 || n_bright < 1)
        throw std::invalid_argument("config: both classes need trials");
    if (detector == Detector::Apd && analysis == Analysis::Classifier)
        throw std::invalid_argument("config: classifier analysis requires the EMCCD detector");
    if (detector == Detector::Emccd && analysis == Analysis::Subbin)
        throw std::invalid_argument("config: subbin analysis requires the APD detector");
    mc::ProtocolConfig check = protocol;
    check.detection_time_s = times_s.front();
    check.validate();
    frame.validate();
    atoms.validate();
}

classify::SubbinModel subbin_model_for(const mc::ProtocolConfig& protocol,
                                       const ion::AtomicConstants& atoms, double detection_time_s,
                                       int k) {
    classify::SubbinModel m;
    m.k = k;
    m.subbin_s = detection_time_s / k;
    m.lambda_bright = (protocol.bright_rate_hz + protocol.background_rate_hz) * m.subbin_s;
    m.lambda_dark = protocol.background_rate_hz * m.subbin_s;
    const double inf = std::numeric_limits<double>::infinity();
    switch (protocol.kind) {
        case mc::ProtocolKind::Standard:
            m.tau_bright_s = protocol.tau_bright_s;
            m.tau_dark_s = protocol.tau_dark_s;
            break;
        case mc::ProtocolKind::D52Shelved: {
            m.tau_bright_s = inf;
            // effective bright-return time: lifetime over the S-branch fraction
            const auto* table = atoms.decay_table(*protocol.shelf_level);
            double s_branch = 0.0;
            const auto norm = table->normalized_fractions();
            for (size_t i = 0; i < table->branches.size(); ++i)
                if (table->branches[i].destination.term == ion::Term::S12) s_branch += norm[i];
            m.tau_dark_s = s_branch > 0.0 ? table->lifetime_s.value / s_branch : inf;
            break;
        }
        case mc::ProtocolKind::F72Shelved:
            m.tau_bright_s = inf;
            m.tau_dark_s = inf;
            break;
    }
    return m;
}

namespace {

// Per-dataset feature cache so frames are rendered once, not per resample.
struct PreparedData {
    std::vector<double> totals;            // APD threshold statistic
    std::vector<std::vector<int>> bins;    // APD subbin vectors
    std::vector<camera::Frame> frames;     // EMCCD path
    std::vector<char> labels;
};

PreparedData prepare(const ExperimentConfig& cfg, const mc::TrialDataset& ds) {
    PreparedData p;
    const size_t n = ds.trials.size();
    p.labels.resize(n);
    for (size_t i = 0; i < n; ++i) p.labels[i] = ds.trials[i].prepared_bright ? 1 : 0;

    if (cfg.detector == Detector::Apd) {
        if (cfg.analysis == Analysis::Subbin) {
            p.bins.resize(n);
            for (size_t i = 0; i < n; ++i)
                p.bins[i] = mc::bin_counts(ds.trials[i], cfg.protocol.subbins);
        }
        p.totals.resize(n);
        for (size_t i = 0; i < n; ++i) p.totals[i] = static_cast<double>(ds.trials[i].tags.size());
    } else {
        camera::FrameSpec spec = cfg.frame;
        p.frames.resize(n);
        for (size_t i = 0; i < n; ++i)
            p.frames[i] = camera::render_frame(static_cast<int>(ds.trials[i].tags.size()), spec,
                                               derive_seed(ds.master_seed, i, 1));
    }
    return p;
}

// Stratified calibration subset: a fixed fraction of each class, reshuffled
// per resample. Guarantees both classes are present.
std::vector<char> calibration_mask(const std::vector<char>& labels, double fraction,
                                   uint64_t master_seed, int resample) {
    std::vector<size_t> dark_idx, bright_idx;
    for (size_t i = 0; i < labels.size(); ++i) (labels[i] ? bright_idx : dark_idx).push_back(i);

    Rng rng(derive_seed(master_seed, static_cast<uint64_t>(resample), 2));
    auto shuffle = [&](std::vector<size_t>& v) {
        for (size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform() * i)]);
    };
    shuffle(dark_idx);
    shuffle(bright_idx);

    std::vector<char> mask(labels.size(), 0);
    const size_t n_cal_dark = std::max<size_t>(1, static_cast<size_t>(dark_idx.size() * fraction));
    const size_t n_cal_bright =
        std::max<size_t>(1, static_cast<size_t>(bright_idx.size() * fraction));
    for (size_t i = 0; i < n_cal_dark; ++i) mask[dark_idx[i]] = 1;
    for (size_t i = 0; i < n_cal_bright; ++i) mask[bright_idx[i]] = 1;
    return mask;
}

classify::ErrorReport evaluate_prepared(const ExperimentConfig& cfg, const mc::TrialDataset& ds,
                                        const PreparedData& p, int resample) {
    const auto mask = calibration_mask(p.labels, cfg.split_fraction, ds.master_seed, resample);
    const size_t n = p.labels.size();

    std::vector<int> eval_labels, predictions;
    eval_labels.reserve(n);
    predictions.reserve(n);

    if (cfg.detector == Detector::Apd && cfg.analysis == Analysis::Threshold) {
        std::vector<double> cal_v;
        std::vector<int> cal_l;
        for (size_t i = 0; i < n; ++i)
            if (mask[i]) {
                cal_v.push_back(p.totals[i]);
                cal_l.push_back(p.labels[i]);
            }
        const auto model = classify::fit_threshold(cal_v, cal_l);
        for (size_t i = 0; i < n; ++i)
            if (!mask[i]) {
                eval_labels.push_back(p.labels[i]);
                predictions.push_back(classify::classify_threshold(model, p.totals[i]));
            }
    } else if (cfg.detector == Detector::Apd && cfg.analysis == Analysis::Subbin) {
        const auto model =
            subbin_model_for(cfg.protocol, cfg.atoms, ds.config.detection_time_s,
                             cfg.protocol.subbins);
        for (size_t i = 0; i < n; ++i)
            if (!mask[i]) {
                eval_labels.push_back(p.labels[i]);
                predictions.push_back(classify::classify_subbin(model, p.bins[i]).label);
            }
    } else {
        // EMCCD: ROI from the calibration bright frames
        std::vector<camera::Frame> cal_bright;
        for (size_t i = 0; i < n; ++i)
            if (mask[i] && p.labels[i]) cal_bright.push_back(p.frames[i]);
        const auto roi = camera::fit_roi(cal_bright);
        const double bias = cfg.frame.bias_adu;

        if (cfg.analysis == Analysis::Threshold) {
            // choose the hot-pixel count on the calibration split
            std::vector<size_t> cal_idx;
            for (size_t i = 0; i < n; ++i)
                if (mask[i]) cal_idx.push_back(i);

            const int roi_px = roi.pixel_count();
            int best_n_hot = roi_px;
            classify::ThresholdModel best_model;
            double best_eps = std::numeric_limits<double>::infinity();
            for (int n_hot = 1; n_hot <= roi_px; n_hot = n_hot < 8 ? n_hot + 1 : n_hot * 2) {
                const int nh = std::min(n_hot, roi_px);
                std::vector<double> cal_v;
                std::vector<int> cal_l;
                for (size_t i : cal_idx) {
                    cal_v.push_back(camera::roi_counts(p.frames[i], roi, nh, bias));
                    cal_l.push_back(p.labels[i]);
                }
                const auto model = classify::fit_threshold(cal_v, cal_l);
                long wd = 0, wb = 0, nd = 0, nb = 0;
                for (size_t j = 0; j < cal_v.size(); ++j) {
                    const int pred = classify::classify_threshold(model, cal_v[j]);
                    if (cal_l[j]) {
                        ++nb;
                        if (!pred) ++wb;
                    } else {
                        ++nd;
                        if (pred) ++wd;
                    }
                }
                const double eps =
                    0.5 * (static_cast<double>(wd) / nd + static_cast<double>(wb) / nb);
                if (eps < best_eps) {
                    best_eps = eps;
                    best_n_hot = nh;
                    best_model = model;
                }
            }
            for (size_t i = 0; i < n; ++i)
                if (!mask[i]) {
                    eval_labels.push_back(p.labels[i]);
                    predictions.push_back(classify::classify_threshold(
                        best_model, camera::roi_counts(p.frames[i], roi, best_n_hot, bias)));
                }
        } else {
            std::vector<std::vector<float>> cal_x;
            std::vector<int> cal_l;
            for (size_t i = 0; i < n; ++i)
                if (mask[i]) {
                    cal_x.push_back(camera::roi_pixels(p.frames[i], roi, bias));
                    cal_l.push_back(p.labels[i]);
                }
            classify::ForestParams fp = cfg.forest;
            fp.seed = derive_seed(ds.master_seed, static_cast<uint64_t>(resample), 4);
            const auto model = classify::train_classifier(cal_x, cal_l, fp);
            for (size_t i = 0; i < n; ++i)
                if (!mask[i]) {
                    eval_labels.push_back(p.labels[i]);
                    predictions.push_back(
                        model.predict(camera::roi_pixels(p.frames[i], roi, bias)));
                }
        }
    }
    return classify::error_report(predictions, eval_labels);
}

}  // namespace

classify::ErrorReport evaluate_dataset(const ExperimentConfig& cfg, const mc::TrialDataset& ds,
                                       int resample_index) {
    const auto prepared = prepare(cfg, ds);
    return evaluate_prepared(cfg, ds, prepared, resample_index);
}

SweepResult sweep_detection_time(const ExperimentConfig& cfg) {
    cfg.validate();
    SweepResult result;
    for (size_t ti = 0; ti < cfg.times_s.size(); ++ti) {
        mc::ProtocolConfig protocol = cfg.protocol;
        protocol.detection_time_s = cfg.times_s[ti];

        ExperimentConfig point_cfg = cfg;
        point_cfg.protocol = protocol;

        const auto ds = mc::run_batch(cfg.atoms, protocol, cfg.n_dark, cfg.n_bright, cfg.schedule,
                                      derive_seed(cfg.seed, ti, 10), cfg.threads);
        const auto prepared = prepare(point_cfg, ds);

        SweepPoint point;
        point.time_s = cfg.times_s[ti];
        point.protocol = protocol_name(protocol.kind);
        point.analysis = analysis_name(cfg.analysis);

        double sum = 0.0, sum_sq = 0.0;
        for (int r = 0; r < cfg.resamples; ++r) {
            const auto report = evaluate_prepared(point_cfg, ds, prepared, r);
            if (r == 0) point.report = report;
            sum += report.eps;
            sum_sq += report.eps * report.eps;
        }
        point.band_mean = sum / cfg.resamples;
        point.band_sigma =
            cfg.resamples > 1
                ? std::sqrt(std::max(0.0, (sum_sq - sum * sum / cfg.resamples) /
                                              (cfg.resamples - 1)))
                : 0.0;
        result.points.push_back(std::move(point));
    }
    return result;
}

namespace {

void csv_number(std::ostream& out, double v) {
    std::ostringstream ss;
    ss << std::setprecision(12) << v;
    out << ss.str();
}

}  // namespace

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
    out << "time_ms,protocol,analysis,eps_dark,eps_bright,eps,ci_low,ci_high,band_mean,band_sigma\n";
    for (const auto& p : result.points) {
        csv_number(out, p.time_s * 1e3);
        out << ',' << p.protocol << ',' << p.analysis << ',';
        csv_number(out, p.report.eps_dark);
        out << ',';
        csv_number(out, p.report.eps_bright);
        out << ',';
        csv_number(out, p.report.eps);
        out << ',';
        csv_number(out, p.report.ci.low);
        out << ',';
        csv_number(out, p.report.ci.high);
        out << ',';
        csv_number(out, p.band_mean);
        out << ',';
        csv_number(out, p.band_sigma);
        out << '\n';
    }
}

void write_sweep_summary_json(const SweepResult& result, std::ostream& out) {
    json j = json::array();
    for (const auto& p : result.points) {
        j.push_back({{"time_ms", p.time_s * 1e3},
                     {"protocol", p.protocol},
                     {"analysis", p.analysis},
                     {"eps_dark", p.report.eps_dark},
                     {"eps_bright", p.report.eps_bright},
                     {"eps", p.report.eps},
                     {"ci", {p.report.ci.low, p.report.ci.high}},
                     {"n_dark", p.report.n_dark},
                     {"n_bright", p.report.n_bright},
                     {"band_mean", p.band_mean},
                     {"band_sigma", p.band_sigma}});
    }
    out << j.dump(2) << '\n';
}

void write_dataset_csv(const mc::TrialDataset& ds, std::ostream& out) {
    const int k = ds.config.subbins;
    out << "trial_id,true_label";
    for (int i = 0; i < k; ++i) out << ",bin" << i;
    out << '\n';
    for (size_t i = 0; i < ds.trials.size(); ++i) {
        const auto bins = mc::bin_counts(ds.trials[i], k);
        out << i << ',' << (ds.trials[i].prepared_bright ? "bright" : "dark");
        for (int b : bins) out << ',' << b;
        out << '\n';
    }
}

void write_tag_dump(const mc::TrialDataset& ds, std::ostream& out) {
    // per trial: u32 LE tag count, then f64 LE seconds per tag
    for (const auto& trial : ds.trials) {
        const uint32_t count = static_cast<uint32_t>(trial.tags.size());
        out.write(reinterpret_cast<const char*>(&count), 4);
        for (double tag : trial.tags) out.write(reinterpret_cast<const char*>(&tag), 8);
    }
}

mc::TrialDataset read_dataset_csv(std::istream& in) {
    mc::TrialDataset ds;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("dataset csv: empty file");
    int k = -2;  // columns after trial_id,true_label
    for (char c : line)
        if (c == ',') ++k;
    ++k;
    if (k < 1) throw std::invalid_argument("dataset csv: bad header");
    ds.config.subbins = k;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // trial_id
        std::getline(ss, cell, ',');
        mc::TimeTagStream t;
        t.prepared_bright = cell == "bright";
        t.window_s = 1.0;  // bins only; tag times are not stored in the CSV
        int total = 0;
        std::vector<int> bins;
        while (std::getline(ss, cell, ',')) {
            bins.push_back(std::stoi(cell));
            total += bins.back();
        }
        if (static_cast<int>(bins.size()) != k)
            throw std::invalid_argument("dataset csv: ragged row");
        // reconstruct tags at subbin midpoints so bin_counts round-trips
        for (size_t b = 0; b < bins.size(); ++b)
            for (int c = 0; c < bins[b]; ++c)
                t.tags.push_back((b + 0.5) / static_cast<double>(k));
        ds.trials.push_back(std::move(t));
    }
    return ds;
}

void write_frame_binary(const camera::Frame& frame, std::ostream& out) {
    for (uint16_t v : frame.adu) out.write(reinterpret_cast<const char*>(&v), 2);
}

void write_frame_sidecar_json(const camera::FrameSpec& spec, std::ostream& out) {
    json j = {{"width", spec.width},
              {"height", spec.height},
              {"psf_center", {spec.psf_x, spec.psf_y}},
              {"psf_sigma", spec.psf_sigma},
              {"quantum_efficiency", spec.quantum_efficiency},
              {"em_gain", spec.em_gain},
              {"read_noise_adu", spec.read_noise_adu},
              {"bias_adu", spec.bias_adu},
              {"adu_per_electron", spec.adu_per_electron},
              {"dtype", "uint16le"},
              {"order", "row-major"}};
    out << j.dump(2) << '\n';
}

void write_roi_json(const camera::Roi& roi, std::ostream& out) {
    json j = {{"center", {roi.center_x, roi.center_y}},
              {"sigma", roi.sigma},
              {"window", {{"x0", roi.x0}, {"y0", roi.y0}, {"x1", roi.x1}, {"y1", roi.y1}}}};
    out << j.dump(2) << '\n';
}

void write_error_report_json(const classify::ErrorReport& r, std::ostream& out) {
    json j = {{"eps_dark", r.eps_dark},
              {"eps_bright", r.eps_bright},
              {"eps", r.eps},
              {"n_dark", r.n_dark},
              {"n_bright", r.n_bright},
              {"ci_dark", {r.ci_dark.low, r.ci_dark.high}},
              {"ci_bright", {r.ci_bright.low, r.ci_bright.high}},
              {"ci", {r.ci.low, r.ci.high}}};
    out << j.dump(2) << '\n';
}

void write_error_report_csv_row(const classify::ErrorReport& r, std::ostream& out, bool header) {
    if (header)
        out << "eps_dark,eps_bright,eps,n_dark,n_bright,ci_low,ci_high\n";
    csv_number(out, r.eps_dark);
    out << ',';
    csv_number(out, r.eps_bright);
    out << ',';
    csv_number(out, r.eps);
    out << ',' << r.n_dark << ',' << r.n_bright << ',';
    csv_number(out, r.ci.low);
    out << ',';
    csv_number(out, r.ci.high);
    out << '\n';
}

namespace {

mc::ProtocolKind parse_protocol_kind(const std::string& s) {
    if (s == "standard") return mc::ProtocolKind::Standard;
    if (s == "d52") return mc::ProtocolKind::D52Shelved;
    if (s == "f72") return mc::ProtocolKind::F72Shelved;
    throw std::invalid_argument("config: unknown protocol kind '" + s + "'");
}

void parse_atomic_overrides(const json& j, ion::AtomicConstants& atoms) {
    // keys mirror the published parameter table rows
    if (j.contains("lifetime_d52_f3_ms")) atoms.d52_f3.lifetime_s.value = j["lifetime_d52_f3_ms"].get<double>() * 1e-3;
    if (j.contains("lifetime_d52_f2_ms")) atoms.d52_f2.lifetime_s.value = j["lifetime_d52_f2_ms"].get<double>() * 1e-3;
    if (j.contains("branch_d52_f3_to_s12_f1")) atoms.d52_f3.branches[0].fraction.value = j["branch_d52_f3_to_s12_f1"].get<double>();
    if (j.contains("branch_d52_f3_to_f72")) atoms.d52_f3.branches[1].fraction.value = j["branch_d52_f3_to_f72"].get<double>();
    if (j.contains("branch_d52_f2_to_s12_f0")) atoms.d52_f2.branches[0].fraction.value = j["branch_d52_f2_to_s12_f0"].get<double>();
    if (j.contains("branch_d52_f2_to_s12_f1")) atoms.d52_f2.branches[1].fraction.value = j["branch_d52_f2_to_s12_f1"].get<double>();
    if (j.contains("branch_d52_f2_to_f72")) atoms.d52_f2.branches[2].fraction.value = j["branch_d52_f2_to_f72"].get<double>();
    if (j.contains("zeeman_s12_khz_per_ut")) atoms.zeeman_s12_hz_per_ut.value = j["zeeman_s12_khz_per_ut"].get<double>() * 1e3;
    if (j.contains("zeeman_d52_f3_khz_per_ut")) atoms.zeeman_d52_f3_hz_per_ut.value = j["zeeman_d52_f3_khz_per_ut"].get<double>() * 1e3;
    if (j.contains("zeeman_d52_f2_khz_per_ut")) atoms.zeeman_d52_f2_hz_per_ut.value = j["zeeman_d52_f2_khz_per_ut"].get<double>() * 1e3;
    if (j.contains("quad_zeeman_d52_f3m0_hz_per_ut2")) atoms.quad_zeeman_d52_f3m0_hz_per_ut2.value = j["quad_zeeman_d52_f3m0_hz_per_ut2"].get<double>();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: JSON parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        if (j.contains("protocol")) {
            const auto& p = j["protocol"];
            const auto kind = parse_protocol_kind(p.value("kind", std::string("standard")));
            switch (kind) {
                case mc::ProtocolKind::Standard:
                    cfg.protocol = mc::ProtocolConfig::standard(250e-6);
                    break;
                case mc::ProtocolKind::D52Shelved:
                    cfg.protocol = mc::ProtocolConfig::d52_shelved(250e-6);
                    break;
                case mc::ProtocolKind::F72Shelved: {
                    double failure = 1e-3;
                    if (p.contains("pump")) {
                        const auto& pump = p["pump"];
                        const auto model = transfer::PumpModel::from_target(
                            pump.value("target", 0.999),
                            pump.value("target_time_ms", 100.0) * 1e-3);
                        failure = 1.0 - transfer::incoherent_pump_probability(
                                            pump.value("pump_time_ms", 100.0) * 1e-3, model);
                    }
                    cfg.protocol = mc::ProtocolConfig::f72_shelved(250e-6, failure);
                    break;
                }
            }
            if (p.contains("bright_rate_per_ms"))
                cfg.protocol.bright_rate_hz = p["bright_rate_per_ms"].get<double>() * 1e3;
            if (p.contains("background_rate_per_ms"))
                cfg.protocol.background_rate_hz = p["background_rate_per_ms"].get<double>() * 1e3;
            if (p.contains("tau_bright_ms"))
                cfg.protocol.tau_bright_s = p["tau_bright_ms"].get<double>() * 1e-3;
            if (p.contains("tau_dark_ms"))
                cfg.protocol.tau_dark_s = p["tau_dark_ms"].get<double>() * 1e-3;
            if (p.contains("shelving_error"))
                cfg.protocol.shelving_error = p["shelving_error"].get<double>();
            if (p.contains("subbins")) cfg.protocol.subbins = p["subbins"].get<int>();
            if (p.contains("shelf_f") && kind == mc::ProtocolKind::D52Shelved)
                cfg.protocol.shelf_level = ion::Level{ion::Term::D52, p["shelf_f"].get<int>(), 0};
        }
        if (j.contains("detector")) {
            const auto d = j["detector"].get<std::string>();
            if (d == "apd")
                cfg.detector = Detector::Apd;
            else if (d == "emccd")
                cfg.detector = Detector::Emccd;
            else
                throw std::invalid_argument("config: unknown detector '" + d + "'");
        }
        if (j.contains("analysis")) {
            const auto a = j["analysis"].get<std::string>();
            if (a == "threshold")
                cfg.analysis = Analysis::Threshold;
            else if (a == "subbin")
                cfg.analysis = Analysis::Subbin;
            else if (a == "classifier")
                cfg.analysis = Analysis::Classifier;
            else
                throw std::invalid_argument("config: unknown analysis '" + a + "'");
        }
        cfg.n_dark = j.value("n_dark", cfg.n_dark);
        cfg.n_bright = j.value("n_bright", cfg.n_bright);
        if (j.contains("times_ms")) {
            cfg.times_s.clear();
            for (double t : j["times_ms"]) cfg.times_s.push_back(t * 1e-3);
        }
        cfg.split_fraction = j.value("split_fraction", cfg.split_fraction);
        cfg.resamples = j.value("resamples", cfg.resamples);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            const auto kind = s.value("kind", std::string("interleave"));
            if (kind == "interleave")
                cfg.schedule = mc::BatchSchedule::interleave();
            else if (kind == "blocks")
                cfg.schedule = mc::BatchSchedule::blocks(s.value("block_size", 1000));
            else
                throw std::invalid_argument("config: unknown schedule '" + kind + "'");
        }
        if (j.contains("camera")) {
            const auto& c = j["camera"];
            cfg.frame.width = c.value("width", cfg.frame.width);
            cfg.frame.height = c.value("height", cfg.frame.height);
            cfg.frame.psf_x = c.value("psf_x", cfg.frame.psf_x);
            cfg.frame.psf_y = c.value("psf_y", cfg.frame.psf_y);
            cfg.frame.psf_sigma = c.value("psf_sigma", cfg.frame.psf_sigma);
            cfg.frame.quantum_efficiency = c.value("quantum_efficiency", cfg.frame.quantum_efficiency);
            cfg.frame.em_gain = c.value("em_gain", cfg.frame.em_gain);
            cfg.frame.read_noise_adu = c.value("read_noise_adu", cfg.frame.read_noise_adu);
            cfg.frame.bias_adu = c.value("bias_adu", cfg.frame.bias_adu);
            cfg.frame.adu_per_electron = c.value("adu_per_electron", cfg.frame.adu_per_electron);
        }
        if (j.contains("forest")) {
            const auto& f = j["forest"];
            cfg.forest.n_trees = f.value("trees", cfg.forest.n_trees);
            cfg.forest.max_depth = f.value("max_depth", cfg.forest.max_depth);
            cfg.forest.min_samples_leaf = f.value("min_samples_leaf", cfg.forest.min_samples_leaf);
        }
        if (j.contains("atomic")) parse_atomic_overrides(j["atomic"], cfg.atoms);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    return cfg;
}

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const ExperimentConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(fs::path(cfg.out_dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + name);
    return out;
}

void scenario_fig4(const ExperimentConfig& cfg) {
    // endpoints measured for the two shelving lines
    const auto seq_13 = transfer::calibrate_sequence(0.061, 0.016, 3);
    const auto seq_02 = transfer::calibrate_sequence(0.021, 0.007, 5);

    auto out = open_out(cfg, "fig4_shelving.csv");
    out << "line,pulse,residual\n";
    for (const auto& [name, seq] : {std::pair{"s1_d3", seq_13}, std::pair{"s0_d2", seq_02}}) {
        const auto res = transfer::sequence_residual(seq);
        for (size_t i = 0; i < res.trajectory.size(); ++i) {
            out << name << ',' << i + 1 << ',';
            csv_number(out, res.trajectory[i]);
            out << '\n';
        }
    }
}

void scenario_fig5(const ExperimentConfig& cfg) {
    const double omega_exp = 19e3, gamma_exp = 2.6e3;
    {
        auto out = open_out(cfg, "fig5_rap_gamma.csv");
        out << "gamma_hz,alpha_opt_hz_per_s,p_max\n";
        for (int i = 0; i <= 60; ++i) {
            const double gamma = std::pow(10.0, 0.0 + i * (5.0 - 0.0) / 60.0);  // 1 Hz .. 100 kHz
            const auto opt = transfer::rap_max_transfer(omega_exp, gamma);
            csv_number(out, gamma);
            out << ',';
            csv_number(out, opt.sweep_rate_hz_s);
            out << ',';
            csv_number(out, opt.probability);
            out << '\n';
        }
        const auto exp_point = transfer::rap_max_transfer(omega_exp, gamma_exp);
        csv_number(out, gamma_exp);
        out << ',';
        csv_number(out, exp_point.sweep_rate_hz_s);
        out << ',';
        csv_number(out, exp_point.probability);
        out << '\n';
    }
    {
        auto out = open_out(cfg, "fig5_rap_omega.csv");
        out << "omega_hz,alpha_opt_hz_per_s,p_max\n";
        for (int i = 0; i <= 60; ++i) {
            const double omega = std::pow(10.0, 3.0 + i * (7.0 - 3.0) / 60.0);  // 1 kHz .. 10 MHz
            const auto opt = transfer::rap_max_transfer(omega, gamma_exp);
            csv_number(out, omega);
            out << ',';
            csv_number(out, opt.sweep_rate_hz_s);
            out << ',';
            csv_number(out, opt.probability);
            out << '\n';
        }
    }
}

void run_sweep_to(const ExperimentConfig& cfg, SweepResult& combined) {
    const auto result = sweep_detection_time(cfg);
    combined.points.insert(combined.points.end(), result.points.begin(), result.points.end());
}

void scenario_fig6(const ExperimentConfig& cfg) {
    SweepResult combined;
    const std::vector<double> grid = {0.05e-3, 0.1e-3, 0.15e-3, 0.25e-3, 0.4e-3, 0.6e-3};

    for (const auto analysis : {Analysis::Threshold, Analysis::Subbin}) {
        ExperimentConfig c = cfg;
        c.detector = Detector::Apd;
        c.analysis = analysis;
        c.times_s = grid;
        c.protocol = mc::ProtocolConfig::standard(grid.front());
        c.protocol.subbins = 5;
        run_sweep_to(c, combined);
        c.protocol = mc::ProtocolConfig::d52_shelved(grid.front());
        c.protocol.subbins = 5;
        run_sweep_to(c, combined);
    }
    {
        ExperimentConfig c = cfg;
        c.detector = Detector::Apd;
        c.analysis = Analysis::Threshold;
        c.times_s = {0.25e-3, 0.5e-3, 1.0e-3};
        c.protocol = mc::ProtocolConfig::f72_shelved(0.25e-3, 1e-9);
        c.schedule = mc::BatchSchedule::blocks(1000);
        run_sweep_to(c, combined);
    }
    auto out = open_out(cfg, "fig6_apd.csv");
    write_sweep_csv(combined, out);
    auto js = open_out(cfg, "fig6_apd.json");
    write_sweep_summary_json(combined, js);
}

void scenario_fig7(const ExperimentConfig& cfg) {
    SweepResult combined;
    const std::vector<double> grid = {0.05e-3, 0.1e-3, 0.2e-3, 0.4e-3, 0.8e-3, 1.5e-3};
    for (const auto analysis : {Analysis::Threshold, Analysis::Classifier}) {
        ExperimentConfig c = cfg;
        c.detector = Detector::Emccd;
        c.analysis = analysis;
        c.times_s = grid;
        c.protocol = mc::ProtocolConfig::standard(grid.front());
        run_sweep_to(c, combined);
        c.protocol = mc::ProtocolConfig::d52_shelved(grid.front());
        run_sweep_to(c, combined);
    }
    auto out = open_out(cfg, "fig7_emccd.csv");
    write_sweep_csv(combined, out);
    auto js = open_out(cfg, "fig7_emccd.json");
    write_sweep_summary_json(combined, js);
}

void scenario_table2(const ExperimentConfig& cfg) {
    struct Row {
        mc::ProtocolConfig protocol;
        Detector detector;
        Analysis analysis;
        std::vector<double> grid;
    };
    const std::vector<double> apd_grid = {0.05e-3, 0.1e-3, 0.15e-3, 0.25e-3, 0.4e-3};
    const std::vector<double> cam_grid = {0.1e-3, 0.2e-3, 0.3e-3, 0.4e-3, 0.8e-3};
    const std::vector<double> f_grid = {0.5e-3, 1.0e-3};

    std::vector<Row> rows;
    const auto std_p = mc::ProtocolConfig::standard(1e-3);
    const auto d52_p = mc::ProtocolConfig::d52_shelved(1e-3);
    const auto f72_p = mc::ProtocolConfig::f72_shelved(1e-3, 1e-9);
    for (const auto& p : {std_p, d52_p}) {
        rows.push_back({p, Detector::Emccd, Analysis::Threshold, cam_grid});
        rows.push_back({p, Detector::Emccd, Analysis::Classifier, cam_grid});
        rows.push_back({p, Detector::Apd, Analysis::Threshold, apd_grid});
        rows.push_back({p, Detector::Apd, Analysis::Subbin, apd_grid});
    }
    rows.push_back({f72_p, Detector::Emccd, Analysis::Threshold, f_grid});
    rows.push_back({f72_p, Detector::Emccd, Analysis::Classifier, f_grid});
    rows.push_back({f72_p, Detector::Apd, Analysis::Threshold, f_grid});

    auto out = open_out(cfg, "table2_summary.csv");
    out << "protocol,detector,analysis,min_eps,t_opt_ms,ci_low,ci_high\n";
    for (auto& row : rows) {
        ExperimentConfig c = cfg;
        c.protocol = row.protocol;
        c.protocol.subbins = 5;
        c.detector = row.detector;
        c.analysis = row.analysis;
        c.times_s = row.grid;
        if (row.protocol.kind == mc::ProtocolKind::F72Shelved)
            c.schedule = mc::BatchSchedule::blocks(1000);
        const auto sweep = sweep_detection_time(c);
        const auto best = std::min_element(
            sweep.points.begin(), sweep.points.end(),
            [](const SweepPoint& a, const SweepPoint& b) { return a.report.eps < b.report.eps; });
        out << protocol_name(row.protocol.kind) << ',' << detector_name(row.detector) << ','
            << analysis_name(row.analysis) << ',';
        csv_number(out, best->report.eps);
        out << ',';
        csv_number(out, best->time_s * 1e3);
        out << ',';
        csv_number(out, best->report.ci.low);
        out << ',';
        csv_number(out, best->report.ci.high);
        out << '\n';
    }
}

void scenario_fig3(const ExperimentConfig& cfg) {
    // synthetic recovery-probability spectra around the two repump centers,
    // frequency axis in MHz relative to 394.42 THz
    const auto atoms = cfg.atoms;
    const double base = 394.42e12;
    const double c_after_d3 = (atoms.f_760_after_d3.value - base) / 1e6;
    const double c_after_d2 = (atoms.f_760_after_d2.value - base) / 1e6;
    const double sigma_mhz = 3.0, amplitude = 0.85, offset = 0.02;
    const int n_per_point = 500;

    std::vector<double> x, y;
    Rng rng(cfg.seed);
    for (double f = std::min(c_after_d2, c_after_d3) - 20.0;
         f <= std::max(c_after_d2, c_after_d3) + 20.0; f += 0.5) {
        double p = offset;
        for (double c : {c_after_d2, c_after_d3}) {
            const double t = (f - c) / sigma_mhz;
            p += amplitude * std::exp(-0.5 * t * t);
        }
        p = std::clamp(p, 0.0, 1.0);
        // binomial sampling noise at n_per_point shots
        long hits = 0;
        for (int i = 0; i < n_per_point; ++i) hits += rng.uniform() < p ? 1 : 0;
        x.push_back(f);
        y.push_back(static_cast<double>(hits) / n_per_point);
    }

    const auto peaks = fit::gaussian_peak_fit(x, y, 2);
    auto out = open_out(cfg, "fig3_peaks.csv");
    out << "peak,center_mhz,center_err_mhz,sigma_mhz,sigma_err_mhz,amplitude,offset,truth_mhz\n";
    const double truths[2] = {std::min(c_after_d2, c_after_d3), std::max(c_after_d2, c_after_d3)};
    for (size_t i = 0; i < peaks.size(); ++i) {
        out << i << ',';
        csv_number(out, peaks[i].center);
        out << ',';
        csv_number(out, peaks[i].center_err);
        out << ',';
        csv_number(out, peaks[i].width);
        out << ',';
        csv_number(out, peaks[i].width_err);
        out << ',';
        csv_number(out, peaks[i].amplitude);
        out << ',';
        csv_number(out, peaks[i].offset);
        out << ',';
        csv_number(out, truths[i]);
        out << '\n';
    }
}

}  // namespace

int run_scenario(const std::string& name, const ExperimentConfig& cfg) {
    try {
        if (name == "fig4-shelving")
            scenario_fig4(cfg);
        else if (name == "fig5-rap")
            scenario_fig5(cfg);
        else if (name == "fig6-apd")
            scenario_fig6(cfg);
        else if (name == "fig7-emccd")
            scenario_fig7(cfg);
        else if (name == "table2-summary")
            scenario_table2(cfg);
        else if (name == "fig3-peakfit")
            scenario_fig3(cfg);
        else
            throw std::invalid_argument("unknown scenario '" + name + "'");
    } catch (const std::invalid_argument&) {
        throw;  // config errors surface as exit code 2 at the CLI layer
    } catch (const fit::PeakFitFailure&) {
        return 3;
    }
    return 0;
}

}  // namespace shelvesim::harness
