#include "vio/evaluation/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vio/common/csv.hpp"
#include "vio/common/error.hpp"

namespace vio {
namespace {

int mode_rank(const std::string& mode) {
  if (mode == "baseline") return 0;
  if (mode == "phase1") return 1;
  if (mode == "phase2") return 2;
  return 3;
}

std::string format(const char* fmt, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), fmt, value);
  return buffer;
}

std::string signed_percent(const std::optional<double>& v) {
  return v ? format("%+.2f%%", *v) : std::string("-");
}

}  // namespace

Trajectory::Trajectory(const std::vector<GroundTruthSample>& rows) {
  for (const GroundTruthSample& r : rows) push_back(r.t, r.T_wb);
}

void Trajectory::push_back(double t, const SE3d& pose) {
  if (!poses_.empty() && !(t > poses_.back().t)) {
    throw Error(ErrorCode::NonMonotonicTime, "trajectory timestamps must strictly increase");
  }
  poses_.push_back({t, pose});
}

std::optional<std::size_t> Trajectory::nearest(double t, double tolerance) const {
  const auto it = std::lower_bound(poses_.begin(), poses_.end(), t,
                                   [](const TimedPose& p, double value) { return p.t < value; });
  std::optional<std::size_t> best;
  double best_dt = tolerance;
  for (auto c : {it, it == poses_.begin() ? poses_.end() : it - 1}) {
    if (c == poses_.end()) continue;
    const double dt = std::abs(c->t - t);
    if (dt <= best_dt) {
      best_dt = dt;
      best = static_cast<std::size_t>(c - poses_.begin());
    }
  }
  return best;
}

SE3d relative_pose(const SE3d& T_i, const SE3d& T_j) { return T_i.inverse() * T_j; }

RpeReport rpe(const Trajectory& estimate, const Trajectory& groundtruth, double assoc_tol) {
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (const auto j = groundtruth.nearest(estimate[i].t, assoc_tol)) matches.emplace_back(i, *j);
  }
  if (matches.empty()) throw Error(ErrorCode::NoAssociation, "no estimated pose matches a ground-truth timestamp");
  if (matches.size() < 2) throw Error(ErrorCode::TooFewPoses, "need at least two associated poses");

  RpeReport report;
  double sum_t = 0, sum_r = 0;
  for (std::size_t k = 0; k + 1 < matches.size(); ++k) {
    const SE3d rel_est = relative_pose(estimate[matches[k].first].T_wb, estimate[matches[k + 1].first].T_wb);
    const SE3d rel_gt = relative_pose(groundtruth[matches[k].second].T_wb, groundtruth[matches[k + 1].second].T_wb);
    const double e_t = (rel_est.translation() - rel_gt.translation()).norm() * 100.0;
    const Eigen::Matrix3d dR = rel_gt.rotation().matrix().transpose() * rel_est.rotation().matrix();
    const double arg = (dR.trace() - 1.0) / 2.0;
    report.max_abs_cos_argument = std::max(report.max_abs_cos_argument, std::abs(arg));
    const double e_r = std::acos(std::clamp(arg, -1.0, 1.0)) * 180.0 / M_PI;
    report.trans_errors_cm.push_back(e_t);
    report.rot_errors_deg.push_back(e_r);
    sum_t += e_t * e_t;
    sum_r += e_r * e_r;
  }
  report.pairs = static_cast<int>(report.trans_errors_cm.size());
  report.trans_rmse_cm = std::sqrt(sum_t / report.pairs);
  report.rot_rmse_deg = std::sqrt(sum_r / report.pairs);
  return report;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "mode,sequence,trans_rmse_cm,rot_rmse_deg,pairs\n";
  for (const ReportRow& r : rows) {
    out += r.mode + "," + r.sequence + "," + fixed(r.trans_rmse_cm, 9) + "," + fixed(r.rot_rmse_deg, 9) + "," +
           std::to_string(r.pairs) + "\n";
  }
  return out;
}

void write_report_csv(const std::filesystem::path& file, const std::vector<ReportRow>& rows) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::DatasetFormatError, "cannot write " + file.string());
  out << report_csv(rows);
}

std::vector<ReportRow> read_report_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::DatasetFormatError, "cannot open report " + file.string());
  const std::string name = file.filename().string();
  std::vector<ReportRow> rows;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    const std::vector<std::string> f = split_csv_line(line);
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::DatasetFormatError, name + " line " + std::to_string(line_no) + ": " + why);
    };
    if (!header) {
      if (f != std::vector<std::string>{"mode", "sequence", "trans_rmse_cm", "rot_rmse_deg", "pairs"}) {
        fail("expected header mode,sequence,trans_rmse_cm,rot_rmse_deg,pairs");
      }
      header = true;
      continue;
    }
    if (f.size() != 5) fail("expected 5 fields");
    try {
      rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]), std::stoi(f[4])});
    } catch (const std::exception&) {
      fail("malformed number");
    }
  }
  if (!header) throw Error(ErrorCode::DatasetFormatError, name + ": missing header");
  return rows;
}

double percent_change(double value, double base) { return (value - base) / base * 100.0; }

Comparison compare(const std::vector<ReportRow>& reports) {
  if (reports.size() < 2) throw Error(ErrorCode::ConfigError, "compare needs at least two reports");
  Comparison out;
  out.sequence = reports.front().sequence;
  for (const ReportRow& r : reports) {
    if (r.sequence != out.sequence) {
      throw Error(ErrorCode::MismatchedDatasets,
                  "reports cover different sequences ('" + out.sequence + "' vs '" + r.sequence + "')");
    }
    out.rows.push_back({r, std::nullopt, std::nullopt});
  }
  std::stable_sort(out.rows.begin(), out.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return mode_rank(a.report.mode) < mode_rank(b.report.mode);
  });
  const auto base = std::find_if(out.rows.begin(), out.rows.end(),
                                 [](const ComparisonRow& r) { return r.report.mode == "baseline"; });
  out.has_baseline = base != out.rows.end();
  if (out.has_baseline) {
    const ReportRow b = base->report;
    for (ComparisonRow& row : out.rows) {
      row.trans_change_pct = percent_change(row.report.trans_rmse_cm, b.trans_rmse_cm);
      row.rot_change_pct = percent_change(row.report.rot_rmse_deg, b.rot_rmse_deg);
    }
  }
  return out;
}

std::string comparison_text(const Comparison& c) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"mode", "trans (cm)"};
  if (c.has_baseline) head.push_back("trans vs base");
  head.push_back("rot (deg)");
  if (c.has_baseline) head.push_back("rot vs base");
  head.push_back("pairs");
  cells.push_back(head);
  for (const ComparisonRow& r : c.rows) {
    std::vector<std::string> line{r.report.mode, format("%.4f", r.report.trans_rmse_cm)};
    if (c.has_baseline) line.push_back(signed_percent(r.trans_change_pct));
    line.push_back(format("%.4f", r.report.rot_rmse_deg));
    if (c.has_baseline) line.push_back(signed_percent(r.rot_change_pct));
    line.push_back(std::to_string(r.report.pairs));
    cells.push_back(line);
  }

  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream out;
  out << "sequence: " << c.sequence << "\n";
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      const std::string& s = cells[r][i];
      // Text columns left-aligned, numbers right-aligned.
      if (i == 0) {
        out << s << std::string(width[i] - s.size(), ' ');
      } else {
        out << "  " << std::string(width[i] - s.size(), ' ') << s;
      }
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

std::string comparison_csv(const Comparison& c) {
  std::string out = "mode,sequence,trans_rmse_cm,rot_rmse_deg,pairs";
  if (c.has_baseline) out += ",trans_change_pct,rot_change_pct";
  out += "\n";
  for (const ComparisonRow& r : c.rows) {
    out += r.report.mode + "," + r.report.sequence + "," + fixed(r.report.trans_rmse_cm, 9) + "," +
           fixed(r.report.rot_rmse_deg, 9) + "," + std::to_string(r.report.pairs);
    if (c.has_baseline) out += "," + fixed(*r.trans_change_pct, 6) + "," + fixed(*r.rot_change_pct, 6);
    out += "\n";
  }
  return out;
}

}  // namespace vio
