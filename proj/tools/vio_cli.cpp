#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vio/common/error.hpp"
#include "vio/estimator/run.hpp"
#include "vio/evaluation/evaluation.hpp"
#include "vio/simulator/simulator.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kRuntime = 4 };

int exit_code(vio::ErrorCode code) {
  using vio::ErrorCode;
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::MismatchedDatasets: return kConfig;
    case ErrorCode::DatasetFormatError:
    case ErrorCode::NoAssociation:
    case ErrorCode::TooFewPoses:
    case ErrorCode::EmptyStream:
    case ErrorCode::NonMonotonicTime: return kData;
    default: return kRuntime;
  }
}

// VIO_LOG=quiet silences progress messages, VIO_LOG=debug adds detail.
int log_level() {
  const char* env = std::getenv("VIO_LOG");
  const std::string v = env ? env : "info";
  if (v == "quiet" || v == "error") return 0;
  if (v == "debug") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << "\n";
}

void debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << msg << "\n";
}

void prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !force) {
    throw vio::Error(vio::ErrorCode::ConfigError,
                     "output directory " + dir.string() + " already exists (use --force to overwrite)");
  }
  fs::create_directories(dir);
}

int cmd_simulate(const std::string& config, const std::string& out, bool force) {
  const vio::ScenarioConfig scenario = vio::load_scenario(config);
  prepare_output(out, force);
  vio::Simulation sim = vio::generate(scenario);
  sim.dataset.name = fs::path(out).filename().string();
  vio::write_simulation(out, sim);
  info("wrote " + std::to_string(sim.dataset.imu.size()) + " IMU samples and " +
       std::to_string(sim.dataset.frames.size()) + " frames to " + out);
  return kOk;
}

int cmd_run(const std::string& dataset_dir, const std::string& mode, const std::string& config, const std::string& out,
            bool force) {
  vio::EstimatorConfig cfg = config.empty() ? vio::EstimatorConfig{} : vio::load_run_config(config);
  cfg.mode.mode = vio::parse_mode(mode);
  const vio::Dataset dataset = vio::read_dataset(dataset_dir);
  prepare_output(out, force);
  try {
    vio::RunResult result = vio::run_sequence(dataset, cfg);
    result.dataset_path = fs::absolute(dataset_dir).lexically_normal().string();
    vio::write_run_outputs(out, result);
    std::ofstream(fs::path(out) / "config.cfg") << vio::run_config_text(cfg);
    info(std::string(vio::to_string(cfg.mode.mode)) + ": " + std::to_string(result.frames.size()) + " poses, " +
         std::to_string(result.keyframes) + " keyframes, " + std::to_string(result.dead_reckoned_frames) +
         " dead-reckoned, " + std::to_string(static_cast<long>(result.wall_ms)) + " ms");
    debug(vio::timing_json(result));
  } catch (const vio::Error& e) {
    std::ofstream(fs::path(out) / "FAILED") << e.what() << "\n";
    throw;
  }
  return kOk;
}

int cmd_evaluate(std::string run_dir, std::string trajectory, std::string groundtruth, std::string mode,
                 std::string sequence, std::string out, double tolerance) {
  if (!run_dir.empty()) {
    const fs::path info_file = fs::path(run_dir) / "run_info.json";
    std::ifstream in(info_file);
    if (!in) throw vio::Error(vio::ErrorCode::DatasetFormatError, "missing " + info_file.string());
    nlohmann::json run_info;
    try {
      in >> run_info;
    } catch (const nlohmann::json::exception& e) {
      throw vio::Error(vio::ErrorCode::DatasetFormatError, info_file.string() + ": " + e.what());
    }
    if (trajectory.empty()) trajectory = (fs::path(run_dir) / "trajectory.csv").string();
    if (groundtruth.empty()) {
      groundtruth = (fs::path(run_info.value("dataset", std::string())) / "groundtruth.csv").string();
    }
    if (mode.empty()) mode = run_info.value("mode", std::string("unknown"));
    if (sequence.empty()) sequence = run_info.value("sequence", std::string("unknown"));
    if (out.empty()) out = (fs::path(run_dir) / "rpe.csv").string();
  }
  if (trajectory.empty() || groundtruth.empty()) {
    throw CLI::ValidationError("evaluate needs --run or both --trajectory and --groundtruth");
  }
  if (mode.empty()) mode = "unknown";
  if (sequence.empty()) sequence = fs::path(groundtruth).parent_path().filename().string();

  const vio::Trajectory est(vio::read_groundtruth(trajectory));
  const vio::Trajectory gt(vio::read_groundtruth(groundtruth));
  const vio::RpeReport report = vio::rpe(est, gt, tolerance);
  const std::vector<vio::ReportRow> rows{{mode, sequence, report.trans_rmse_cm, report.rot_rmse_deg, report.pairs}};
  std::cout << vio::report_csv(rows);
  if (!out.empty()) vio::write_report_csv(out, rows);
  return kOk;
}

int cmd_compare(const std::vector<std::string>& files, const std::string& out) {
  std::vector<vio::ReportRow> rows;
  for (const std::string& f : files) {
    const auto parsed = vio::read_report_csv(f);
    rows.insert(rows.end(), parsed.begin(), parsed.end());
  }
  const vio::Comparison comparison = vio::compare(rows);
  std::cout << vio::comparison_text(comparison);
  if (!out.empty()) {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw vio::Error(vio::ErrorCode::DatasetFormatError, "cannot write " + out);
    file << vio::comparison_csv(comparison);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-inertial odometry with learned landmark uncertainty"};
  app.require_subcommand(1);

  std::string sim_config, sim_out;
  bool sim_force = false;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset from a scenario config");
  simulate->add_option("config", sim_config, "Scenario config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "Output dataset directory")->required();
  simulate->add_flag("--force", sim_force, "Overwrite an existing output directory");

  std::string run_dataset, run_mode, run_config, run_out;
  bool run_force = false;
  auto* run = app.add_subcommand("run", "Run the estimator on a dataset");
  run->add_option("--dataset", run_dataset, "Dataset directory")->required();
  run->add_option("--mode", run_mode, "baseline, phase1 or phase2")
      ->required()
      ->check(CLI::IsMember({"baseline", "phase1", "phase2"}));
  run->add_option("--config", run_config, "Estimator config file")->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_flag("--force", run_force, "Overwrite an existing output directory");

  std::string ev_run, ev_traj, ev_gt, ev_mode, ev_seq, ev_out;
  double ev_tol = 1e-3;
  auto* evaluate = app.add_subcommand("evaluate", "Relative pose error of a run against ground truth");
  evaluate->add_option("--run", ev_run, "Run output directory (reads run_info.json)");
  evaluate->add_option("--trajectory", ev_traj, "Estimated trajectory CSV");
  evaluate->add_option("--groundtruth", ev_gt, "Ground-truth CSV");
  evaluate->add_option("--mode", ev_mode, "Label for the report row");
  evaluate->add_option("--sequence", ev_seq, "Sequence name for the report row");
  evaluate->add_option("--out", ev_out, "Report CSV (defaults to <run>/rpe.csv)");
  evaluate->add_option("--tolerance", ev_tol, "Timestamp association tolerance, s")->check(CLI::PositiveNumber);

  std::vector<std::string> cmp_files;
  std::string cmp_out;
  auto* compare = app.add_subcommand("compare", "Tabulate reports against the baseline");
  compare->add_option("reports", cmp_files, "Report CSV files")->required()->check(CLI::ExistingFile);
  compare->add_option("--out", cmp_out, "Comparison CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim_config, sim_out, sim_force);
    if (*run) return cmd_run(run_dataset, run_mode, run_config, run_out, run_force);
    if (*evaluate) return cmd_evaluate(ev_run, ev_traj, ev_gt, ev_mode, ev_seq, ev_out, ev_tol);
    if (*compare) return cmd_compare(cmp_files, cmp_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const vio::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
