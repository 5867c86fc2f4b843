#include "vio/simulator/dataset.hpp"

#include <fstream>
#include <sstream>

#include "vio/common/config.hpp"
#include "vio/common/csv.hpp"
#include "vio/common/error.hpp"

namespace vio {
namespace {

const std::vector<std::string> kImuHeader{"t", "wx", "wy", "wz", "ax", "ay", "az"};
const std::vector<std::string> kFeatureHeader{"frame_id", "t", "landmark_id", "u", "v", "xn", "yn"};
const std::vector<std::string> kPoseHeader{"t", "px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz"};
const std::vector<std::string> kNoiseHeader{"landmark_id", "sigma_px"};

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
  return out;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::DatasetFormatError, "cannot write " + file.string());
  out << text;
}

int as_int(const CsvRow& row, std::size_t i, const std::filesystem::path& file) {
  const double v = row.values[i];
  if (v != static_cast<int>(v)) {
    throw Error(ErrorCode::DatasetFormatError,
                file.filename().string() + " line " + std::to_string(row.line) + ": expected an integer id");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string calibration_text(const Calibration& calib) {
  const PinholeCamerad& c = calib.camera;
  const Eigen::Quaterniond q = c.T_cb.rotation().quaternion();
  const Eigen::Vector3d& t = c.T_cb.translation();
  const Eigen::Vector3d& g = calib.gravity.g_world;
  std::ostringstream out;
  out << "# pinhole intrinsics (pixels), body-to-camera extrinsic, world gravity (m/s^2)\n";
  out << "fx = " << format_double(c.fx) << "\n";
  out << "fy = " << format_double(c.fy) << "\n";
  out << "cx = " << format_double(c.cx) << "\n";
  out << "cy = " << format_double(c.cy) << "\n";
  out << "width = " << c.width << "\n";
  out << "height = " << c.height << "\n";
  out << "T_cb = " << format_double(t.x()) << " " << format_double(t.y()) << " " << format_double(t.z()) << " "
      << format_double(q.w()) << " " << format_double(q.x()) << " " << format_double(q.y()) << " "
      << format_double(q.z()) << "\n";
  out << "gravity = " << format_double(g.x()) << " " << format_double(g.y()) << " " << format_double(g.z()) << "\n";
  return out.str();
}

Calibration read_calibration(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) {
    throw Error(ErrorCode::DatasetFormatError, "missing " + file.string());
  }
  try {
    const ConfigFile cfg = ConfigFile::load(file);
    Calibration calib;
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height", "T_cb"}) {
      if (!cfg.has(key)) throw Error(ErrorCode::ConfigError, std::string("calib.cfg is missing '") + key + "'");
    }
    calib.camera.fx = cfg.get_double("fx", 0);
    calib.camera.fy = cfg.get_double("fy", 0);
    calib.camera.cx = cfg.get_double("cx", 0);
    calib.camera.cy = cfg.get_double("cy", 0);
    calib.camera.width = cfg.get_int("width", 0);
    calib.camera.height = cfg.get_int("height", 0);
    const Eigen::VectorXd tcb = cfg.get_vector("T_cb", 7, Eigen::VectorXd());
    calib.camera.T_cb = SE3d(SO3d(Eigen::Quaterniond(tcb(3), tcb(4), tcb(5), tcb(6))), tcb.head<3>());
    calib.gravity.g_world = cfg.get_vector("gravity", 3, Eigen::Vector3d(0, 0, -9.81));
    cfg.reject_unknown();
    if (!calib.camera.valid()) throw Error(ErrorCode::ConfigError, "invalid camera intrinsics");
    return calib;
  } catch (const Error& e) {
    throw Error(ErrorCode::DatasetFormatError, std::string("calib.cfg: ") + e.what());
  }
}

std::vector<GroundTruthSample> read_groundtruth(const std::filesystem::path& file) {
  std::vector<GroundTruthSample> out;
  for (const CsvRow& row : read_numeric_csv(file, kPoseHeader)) {
    const auto& v = row.values;
    GroundTruthSample s;
    s.t = v[0];
    s.T_wb = SE3d(SO3d(Eigen::Quaterniond(v[4], v[5], v[6], v[7])), Eigen::Vector3d(v[1], v[2], v[3]));
    s.v_w = Eigen::Vector3d(v[8], v[9], v[10]);
    if (!out.empty() && !(s.t > out.back().t)) {
      throw Error(ErrorCode::DatasetFormatError,
                  file.filename().string() + " line " + std::to_string(row.line) + ": timestamps must increase");
    }
    out.push_back(s);
  }
  return out;
}

void write_pose_csv(const std::filesystem::path& file, const std::vector<GroundTruthSample>& rows) {
  std::string text = join(kPoseHeader) + "\n";
  for (const GroundTruthSample& s : rows) {
    Eigen::Quaterniond q = s.T_wb.rotation().quaternion();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    const Eigen::Vector3d& p = s.T_wb.translation();
    text += fixed(s.t, 9) + "," + fixed(p.x(), 12) + "," + fixed(p.y(), 12) + "," + fixed(p.z(), 12) + "," +
            fixed(q.w(), 12) + "," + fixed(q.x(), 12) + "," + fixed(q.y(), 12) + "," + fixed(q.z(), 12) + "," +
            fixed(s.v_w.x(), 12) + "," + fixed(s.v_w.y(), 12) + "," + fixed(s.v_w.z(), 12) + "\n";
  }
  write_text(file, text);
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);

  std::string imu = join(kImuHeader) + "\n";
  for (const ImuSample& s : dataset.imu) {
    imu += fixed(s.t, 9) + "," + fixed(s.omega.x(), 12) + "," + fixed(s.omega.y(), 12) + "," +
           fixed(s.omega.z(), 12) + "," + fixed(s.accel.x(), 12) + "," + fixed(s.accel.y(), 12) + "," +
           fixed(s.accel.z(), 12) + "\n";
  }
  write_text(dir / "imu.csv", imu);

  std::string features = join(kFeatureHeader) + "\n";
  for (const FrameObservations& f : dataset.frames) {
    for (const FeatureObservation& o : f.features) {
      features += std::to_string(f.frame_id) + "," + fixed(f.t, 9) + "," + std::to_string(o.landmark_id) + "," +
                  fixed(o.uv.x(), 9) + "," + fixed(o.uv.y(), 9) + "," + fixed(o.p_norm.x(), 12) + "," +
                  fixed(o.p_norm.y(), 12) + "\n";
    }
  }
  write_text(dir / "features.csv", features);

  write_pose_csv(dir / "groundtruth.csv", dataset.groundtruth);
  write_text(dir / "calib.cfg", calibration_text(dataset.calib));
  write_text(dir / "meta.cfg", dataset.meta);

  std::string noise = join(kNoiseHeader) + "\n";
  for (const auto& [id, sigma] : dataset.landmark_sigma_px) {
    noise += std::to_string(id) + "," + fixed(sigma, 6) + "\n";
  }
  write_text(dir / "landmark_noise.csv", noise);
}

Dataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::DatasetFormatError, "dataset directory not found: " + dir.string());
  }
  Dataset ds;
  ds.name = std::filesystem::absolute(dir).lexically_normal().filename().string();
  if (ds.name.empty()) ds.name = std::filesystem::absolute(dir).lexically_normal().parent_path().filename().string();
  ds.calib = read_calibration(dir / "calib.cfg");

  const std::filesystem::path imu_file = dir / "imu.csv";
  for (const CsvRow& row : read_numeric_csv(imu_file, kImuHeader)) {
    const auto& v = row.values;
    ImuSample s{v[0], Eigen::Vector3d(v[1], v[2], v[3]), Eigen::Vector3d(v[4], v[5], v[6])};
    if (!ds.imu.empty() && !(s.t > ds.imu.back().t)) {
      throw Error(ErrorCode::DatasetFormatError, "imu.csv line " + std::to_string(row.line) + ": timestamps must increase");
    }
    ds.imu.push_back(s);
  }

  const std::filesystem::path feature_file = dir / "features.csv";
  const std::vector<CsvRow> feature_rows = read_numeric_csv(feature_file, kFeatureHeader);
  if (feature_rows.empty()) {
    throw Error(ErrorCode::DatasetFormatError, "features.csv contains no observations");
  }
  for (const CsvRow& row : feature_rows) {
    const auto& v = row.values;
    const int frame_id = as_int(row, 0, feature_file);
    if (ds.frames.empty() || ds.frames.back().frame_id != frame_id) {
      if (!ds.frames.empty() && !(v[1] > ds.frames.back().t && frame_id > ds.frames.back().frame_id)) {
        throw Error(ErrorCode::DatasetFormatError,
                    "features.csv line " + std::to_string(row.line) + ": frames must be ordered by id and time");
      }
      ds.frames.push_back({frame_id, v[1], {}});
    } else if (v[1] != ds.frames.back().t) {
      throw Error(ErrorCode::DatasetFormatError,
                  "features.csv line " + std::to_string(row.line) + ": inconsistent timestamp within frame");
    }
    ds.frames.back().features.push_back(
        {as_int(row, 2, feature_file), Eigen::Vector2d(v[3], v[4]), Eigen::Vector2d(v[5], v[6])});
  }

  if (std::filesystem::exists(dir / "groundtruth.csv")) ds.groundtruth = read_groundtruth(dir / "groundtruth.csv");
  if (std::filesystem::exists(dir / "landmark_noise.csv")) {
    for (const CsvRow& row : read_numeric_csv(dir / "landmark_noise.csv", kNoiseHeader)) {
      ds.landmark_sigma_px[as_int(row, 0, dir / "landmark_noise.csv")] = row.values[1];
    }
  }
  if (std::filesystem::exists(dir / "meta.cfg")) {
    std::ifstream in(dir / "meta.cfg");
    std::stringstream buffer;
    buffer << in.rdbuf();
    ds.meta = buffer.str();
  }
  return ds;
}

DatasetReplay::DatasetReplay(const std::filesystem::path& dir)
    : dataset_(std::make_shared<const Dataset>(read_dataset(dir))) {}

std::optional<ReplayEvent> DatasetReplay::next() {
  const Dataset& ds = *dataset_;
  const bool imu_left = imu_index_ < ds.imu.size();
  const bool frames_left = frame_index_ < ds.frames.size();
  if (!imu_left && !frames_left) return std::nullopt;
  if (imu_left && (!frames_left || ds.imu[imu_index_].t <= ds.frames[frame_index_].t)) {
    return ReplayEvent(ds.imu[imu_index_++]);
  }
  return ReplayEvent(ds.frames[frame_index_++]);
}

}  // namespace vio
