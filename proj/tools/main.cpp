#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "shelvesim/harness.hpp"
#include "shelvesim/peakfit.hpp"

namespace {

namespace fs = std::filesystem;
using namespace shelvesim;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitFit = 3;

harness::ExperimentConfig load_config(const std::string& config_path, uint64_t seed, int threads,
                                      const std::string& out_dir) {
    harness::ExperimentConfig cfg;
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("config: cannot open " + config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = harness::config_from_json_text(ss.str());
    }
    if (seed != 0) cfg.seed = seed;
    if (threads > 0) cfg.threads = threads;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

int cmd_simulate(const harness::ExperimentConfig& cfg) {
    mc::ProtocolConfig protocol = cfg.protocol;
    protocol.detection_time_s = cfg.times_s.front();
    const auto ds = mc::run_batch(cfg.atoms, protocol, cfg.n_dark, cfg.n_bright, cfg.schedule,
                                  cfg.seed, cfg.threads);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "dataset.csv", std::ios::binary);
        harness::write_dataset_csv(ds, out);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "tags.bin", std::ios::binary);
        harness::write_tag_dump(ds, out);
    }
    std::cout << "wrote " << ds.trials.size() << " trials to " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_sweep(const harness::ExperimentConfig& cfg) {
    const auto result = harness::sweep_detection_time(cfg);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "sweep.csv", std::ios::binary);
        harness::write_sweep_csv(result, out);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "sweep.json", std::ios::binary);
        harness::write_sweep_summary_json(result, out);
    }
    for (const auto& p : result.points)
        std::cout << p.protocol << " " << p.analysis << " t=" << p.time_s * 1e3
                  << "ms eps=" << p.report.eps << "\n";
    return kExitOk;
}

int cmd_fit_peaks(const std::string& in_path, int n_peaks, const std::string& out_dir) {
    std::ifstream in(in_path);
    if (!in) throw std::invalid_argument("fit-peaks: cannot open " + in_path);
    std::vector<double> x, y;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
            throw std::invalid_argument("fit-peaks: expected x,y rows");
        x.push_back(std::stod(a));
        y.push_back(std::stod(b));
    }
    const auto peaks = fit::gaussian_peak_fit(x, y, n_peaks);
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "peaks.csv", std::ios::binary);
    out << "peak,center,center_err,sigma,sigma_err,amplitude,amplitude_err,offset\n";
    for (size_t i = 0; i < peaks.size(); ++i)
        out << i << ',' << peaks[i].center << ',' << peaks[i].center_err << ',' << peaks[i].width
            << ',' << peaks[i].width_err << ',' << peaks[i].amplitude << ','
            << peaks[i].amplitude_err << ',' << peaks[i].offset << '\n';
    std::cout << "fitted " << peaks.size() << " peaks\n";
    return kExitOk;
}

int cmd_report(const harness::ExperimentConfig& cfg, const std::string& in_path) {
    std::ifstream in(in_path);
    if (!in) throw std::invalid_argument("report: cannot open " + in_path);
    auto ds = harness::read_dataset_csv(in);
    ds.config = cfg.protocol;
    ds.config.detection_time_s = cfg.times_s.front();
    ds.master_seed = cfg.seed;
    // re-spread the reconstructed subbin midpoints onto the real window
    for (auto& t : ds.trials) {
        for (auto& tag : t.tags) tag *= ds.config.detection_time_s;
        t.window_s = ds.config.detection_time_s;
    }
    const auto report = harness::evaluate_dataset(cfg, ds, 0);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream out(fs::path(cfg.out_dir) / "report.json", std::ios::binary);
        harness::write_error_report_json(report, out);
    }
    {
        std::ofstream out(fs::path(cfg.out_dir) / "report.csv", std::ios::binary);
        harness::write_error_report_csv_row(report, out, true);
    }
    std::cout << "eps=" << report.eps << " (dark " << report.eps_dark << ", bright "
              << report.eps_bright << ")\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electron-shelving state-detection simulator and analysis toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // allow the global options after the subcommand too

    std::string config_path, out_dir;
    uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--seed", seed, "master seed override");
    app.add_option("--threads", threads, "worker thread count");
    app.add_option("--out", out_dir, "output directory");

    auto* simulate = app.add_subcommand("simulate", "generate a trial dataset");
    auto* sweep = app.add_subcommand("sweep", "detection-time sweep with error bands");
    auto* scenario = app.add_subcommand("scenario", "run a named end-to-end pipeline");
    std::string scenario_name;
    scenario->add_option("name", scenario_name,
                         "fig4-shelving | fig5-rap | fig6-apd | fig7-emccd | table2-summary | "
                         "fig3-peakfit")
        ->required();
    auto* fit_peaks = app.add_subcommand("fit-peaks", "Gaussian peak fit on a CSV spectrum");
    std::string peaks_in;
    int n_peaks = 1;
    fit_peaks->add_option("--in", peaks_in, "input CSV with x,y columns")->required();
    fit_peaks->add_option("--n-peaks", n_peaks, "number of peaks");
    auto* report = app.add_subcommand("report", "error report for a stored dataset");
    std::string report_in;
    report->add_option("--in", report_in, "dataset CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load_config(config_path, seed, threads, out_dir);
        if (simulate->parsed()) return cmd_simulate(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg);
        if (scenario->parsed()) return harness::run_scenario(scenario_name, cfg);
        if (fit_peaks->parsed())
            return cmd_fit_peaks(peaks_in, n_peaks, out_dir.empty() ? "." : out_dir);
        if (report->parsed()) return cmd_report(cfg, report_in);
    } catch (const shelvesim::fit::PeakFitFailure& e) {
        std::cerr << "fit failure: " << e.what() << " (residual " << e.residual_norm << ")\n";
        return kExitFit;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFit;
    }
    return kExitOk;
}
