#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "shelvesim/atomic.hpp"
#include "shelvesim/camera.hpp"
#include "shelvesim/classify.hpp"
#include "shelvesim/forest.hpp"
#include "shelvesim/mc.hpp"

namespace shelvesim::harness {

enum class Detector { Apd, Emccd };
enum class Analysis { Threshold, Subbin, Classifier };

std::string detector_name(Detector d);
std::string analysis_name(Analysis a);
std::string protocol_name(mc::ProtocolKind k);

struct ExperimentConfig {
    mc::ProtocolConfig protocol = mc::ProtocolConfig::standard(250e-6);
    Detector detector = Detector::Apd;
    Analysis analysis = Analysis::Threshold;
    int n_dark = 20000;
    int n_bright = 20000;
    std::vector<double> times_s = {250e-6};
    double split_fraction = 0.05;
    int resamples = 20;
    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = ".";
    mc::BatchSchedule schedule = mc::BatchSchedule::interleave();
    camera::FrameSpec frame{};
    classify::ForestParams forest{};
    ion::AtomicConstants atoms = ion::AtomicConstants::defaults();

    void validate() const;
};

// Parses the JSON config document (see README for the schema). Throws
// std::invalid_argument on malformed input.
ExperimentConfig config_from_json_text(const std::string& text);

struct SweepPoint {
    double time_s = 0.0;
    std::string protocol;
    std::string analysis;
    classify::ErrorReport report;  // canonical (first) calibration split
    double band_mean = 0.0;        // over resampled calibration subsets
    double band_sigma = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> points;
};

SweepResult sweep_detection_time(const ExperimentConfig& cfg);

// Evaluates one dataset under the configured detector/analysis for one
// calibration resample; returns the evaluation-set error report.
classify::ErrorReport evaluate_dataset(const ExperimentConfig& cfg, const mc::TrialDataset& ds,
                                       int resample_index);

void write_sweep_csv(const SweepResult& result, std::ostream& out);
void write_sweep_summary_json(const SweepResult& result, std::ostream& out);

// Dataset serialization: columnar CSV and a little-endian f64 binary tag dump.
void write_dataset_csv(const mc::TrialDataset& ds, std::ostream& out);
void write_tag_dump(const mc::TrialDataset& ds, std::ostream& out);
mc::TrialDataset read_dataset_csv(std::istream& in);

// Frame + ROI serialization per the camera interface contract.
void write_frame_binary(const camera::Frame& frame, std::ostream& out);
void write_frame_sidecar_json(const camera::FrameSpec& spec, std::ostream& out);
void write_roi_json(const camera::Roi& roi, std::ostream& out);

void write_error_report_json(const classify::ErrorReport& r, std::ostream& out);
void write_error_report_csv_row(const classify::ErrorReport& r, std::ostream& out,
                                bool header = false);

// Named end-to-end pipelines. Returns process exit code semantics:
// 0 success, 2 config error, 3 fit/convergence failure.
int run_scenario(const std::string& name, const ExperimentConfig& cfg);

// Subbin likelihood parameters implied by a protocol config.
classify::SubbinModel subbin_model_for(const mc::ProtocolConfig& protocol,
                                       const ion::AtomicConstants& atoms, double detection_time_s,
                                       int k);

}  // namespace shelvesim::harness
