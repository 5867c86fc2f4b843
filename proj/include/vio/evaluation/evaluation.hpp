#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vio/geometry/se3.hpp"
#include "vio/simulator/dataset.hpp"

namespace vio {

struct TimedPose {
  double t{0};
  SE3d T_wb;
};

/// Time-ordered poses; push_back rejects non-increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(const std::vector<GroundTruthSample>& rows);

  void push_back(double t, const SE3d& pose);
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return poses_[i]; }
  const std::vector<TimedPose>& poses() const { return poses_; }

  /// Index of the pose closest in time to `t` within `tolerance`, if any.
  std::optional<std::size_t> nearest(double t, double tolerance) const;

 private:
  std::vector<TimedPose> poses_;
};

/// T_i^-1 * T_j
SE3d relative_pose(const SE3d& T_i, const SE3d& T_j);

struct RpeReport {
  double trans_rmse_cm{0};
  double rot_rmse_deg{0};
  std::vector<double> trans_errors_cm;
  std::vector<double> rot_errors_deg;
  int pairs{0};
  double max_abs_cos_argument{0};  // before clamping; > 1 only through round-off
};

/**
 * Frame-to-frame relative pose error over consecutive associated poses.
 * Association is nearest timestamp within `assoc_tol` seconds. Throws
 * NoAssociation when nothing associates and TooFewPoses with a single associated pose.
 */
RpeReport rpe(const Trajectory& estimate, const Trajectory& groundtruth, double assoc_tol = 1e-3);

/// One line of the report CSV `mode,sequence,trans_rmse_cm,rot_rmse_deg,pairs`.
struct ReportRow {
  std::string mode;
  std::string sequence;
  double trans_rmse_cm{0};
  double rot_rmse_deg{0};
  int pairs{0};
};

std::string report_csv(const std::vector<ReportRow>& rows);
void write_report_csv(const std::filesystem::path& file, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(const std::filesystem::path& file);

/// (value - base) / base * 100
double percent_change(double value, double base);

struct ComparisonRow {
  ReportRow report;
  std::optional<double> trans_change_pct;
  std::optional<double> rot_change_pct;
};

struct Comparison {
  std::string sequence;
  std::vector<ComparisonRow> rows;  // ordered baseline, phase1, phase2, then any other label
  bool has_baseline{false};
};

/**
 * Per-mode RMSE table with percentage change against the baseline row. The
 * change columns are absent when no baseline report is supplied. Throws
 * MismatchedDatasets when reports name different sequences.
 */
Comparison compare(const std::vector<ReportRow>& reports);
std::string comparison_text(const Comparison& comparison);
std::string comparison_csv(const Comparison& comparison);

}  // namespace vio
