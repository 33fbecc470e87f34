#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "marker_nav/benchmark.hpp"
#include "marker_nav/error.hpp"
#include "marker_nav/simulator.hpp"

namespace marker_nav {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Reads one JSON object, remembering which keys were consumed so that
/// anything left over can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string key_path(const std::string& key) const { return join_key(path_, key); }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(key_path(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <std::size_t N>
  void read_array(const std::string& key, std::array<double, N>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != N) {
        throw ConfigError(key_path(key), "expected an array of " + std::to_string(N) + " numbers");
      }
      for (std::size_t i = 0; i < N; ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(key_path(key), "expected numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(key_path(item.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json diag_json(const Mat6& m) {
  json out = json::array();
  for (int i = 0; i < 6; ++i) out.push_back(m(i, i));
  return out;
}

inline std::array<double, 6> diag_array(const Mat6& m) {
  std::array<double, 6> out{};
  for (int i = 0; i < 6; ++i) out[i] = m(i, i);
  return out;
}

inline Mat6 diag_matrix(const std::array<double, 6>& d) {
  return Vec6(d[0], d[1], d[2], d[3], d[4], d[5]).asDiagonal();
}

inline SelectionPolicy parse_policy(const std::string& s, const std::string& key) {
  if (s == "ours") return SelectionPolicy::ours;
  if (s == "method_a") return SelectionPolicy::method_a;
  throw ConfigError(key, "expected \"ours\" or \"method_a\", got \"" + s + "\"");
}

}  // namespace detail

inline SelectionPolicy parse_policy(const std::string& s) {
  return detail::parse_policy(s, "selection_policy");
}

/// Full, explicit scenario document. Keys are emitted sorted, so the dump is canonical.
inline json to_json(const SimConfig& cfg) {
  json cams = json::array();
  for (const auto& c : cfg.cameras) {
    cams.push_back({{"fx", c.intrinsics.fx},
                    {"fy", c.intrinsics.fy},
                    {"cx", c.intrinsics.cx},
                    {"cy", c.intrinsics.cy},
                    {"width", c.intrinsics.width},
                    {"height", c.intrinsics.height},
                    {"mount_yaw", c.mount_yaw},
                    {"position", detail::vec_json(c.position)}});
  }
  json corners = json::array();
  for (const auto& p : cfg.marker.corners_world()) corners.push_back(detail::vec_json(p));
  json wps = json::array();
  for (const auto& w : cfg.waypoints) wps.push_back({{"x", w.x}, {"y", w.y}, {"radius", w.radius}});
  json p0 = json::array();
  for (int i = 0; i < 6; ++i) p0.push_back(cfg.p0_diag(i));

  return {
      {"schema_version", kSchemaVersion},
      {"dt", cfg.dt},
      {"substeps", cfg.substeps},
      {"max_steps", cfg.max_steps},
      {"seed", cfg.seed},
      {"selection_policy", std::string(to_string(cfg.selection_policy))},
      {"static_frames", cfg.static_frames},
      {"noise",
       {{"pixel_sigma", cfg.pixel_noise_sigma},
        {"speed_sigma", cfg.speed_noise_sigma},
        {"steer_sigma", cfg.steer_noise_sigma}}},
      {"rig", {{"cameras", cams}}},
      {"marker", {{"corners", corners}, {"side_length", cfg.marker.side_length()}}},
      {"vehicle", {{"wheelbase", cfg.bicycle.wheelbase}, {"steering_limit", cfg.bicycle.steering_limit}}},
      {"filter",
       {{"q_diag", detail::diag_json(cfg.filter_noise.Q)},
        {"r_diag", detail::diag_json(cfg.filter_noise.R)},
        {"p0_diag", p0}}},
      {"disambiguation", {{"w2", cfg.w2}}},
      {"controller",
       {{"p1", cfg.gains.p1},
        {"p2", cfg.gains.p2},
        {"u_max", cfg.gains.u_max},
        {"success_tolerance", cfg.success_tolerance}}},
      {"waypoints", wps},
      {"initial_pose", {{"x", cfg.initial_pose.x}, {"y", cfg.initial_pose.y}, {"psi", cfg.initial_pose.psi}}},
      {"plant", {{"k_u", cfg.k_u}, {"tau", cfg.tau}}},
      {"lm", {{"max_iterations", cfg.lm.max_iterations}}},
  };
}

/// Strict parse: unknown keys are rejected, absent keys keep their defaults,
/// `schema_version` is mandatory. The result is validated.
inline SimConfig config_from_json(const json& doc) {
  SimConfig cfg;
  detail::ObjectReader root(doc, "");

  const json* version = root.find("schema_version");
  if (!version) throw ConfigError("schema_version", "missing");
  if (!version->is_number_integer() || version->get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported, expected " + std::to_string(kSchemaVersion));
  }

  root.read("dt", cfg.dt);
  root.read("substeps", cfg.substeps);
  root.read("max_steps", cfg.max_steps);
  root.read("seed", cfg.seed);
  root.read("static_frames", cfg.static_frames);
  std::string policy(to_string(cfg.selection_policy));
  root.read("selection_policy", policy);
  cfg.selection_policy = detail::parse_policy(policy, "selection_policy");

  if (const json* n = root.find("noise")) {
    detail::ObjectReader r(*n, "noise");
    r.read("pixel_sigma", cfg.pixel_noise_sigma);
    r.read("speed_sigma", cfg.speed_noise_sigma);
    r.read("steer_sigma", cfg.steer_noise_sigma);
    r.finish();
  }

  if (const json* rig = root.find("rig")) {
    detail::ObjectReader r(*rig, "rig");
    if (const json* cams = r.find("cameras")) {
      if (!cams->is_array() || cams->size() != kRigSize) {
        throw ConfigError("rig.cameras", "expected an array of " + std::to_string(kRigSize) + " cameras");
      }
      for (std::size_t j = 0; j < kRigSize; ++j) {
        const std::string path = "rig.cameras[" + std::to_string(j) + "]";
        detail::ObjectReader c((*cams)[j], path);
        CameraSpec& spec = cfg.cameras[j];
        c.read("fx", spec.intrinsics.fx);
        c.read("fy", spec.intrinsics.fy);
        c.read("cx", spec.intrinsics.cx);
        c.read("cy", spec.intrinsics.cy);
        c.read("width", spec.intrinsics.width);
        c.read("height", spec.intrinsics.height);
        c.read("mount_yaw", spec.mount_yaw);
        std::array<double, 3> pos{spec.position.x(), spec.position.y(), spec.position.z()};
        c.read_array("position", pos);
        spec.position = Vec3(pos[0], pos[1], pos[2]);
        c.finish();
      }
    }
    r.finish();
  }

  if (const json* m = root.find("marker")) {
    detail::ObjectReader r(*m, "marker");
    std::array<Vec3, 4> corners = cfg.marker.corners_world();
    double side = cfg.marker.side_length();
    if (const json* cs = r.find("corners")) {
      if (!cs->is_array() || cs->size() != 4) throw ConfigError("marker.corners", "expected 4 corners");
      for (std::size_t i = 0; i < 4; ++i) {
        const json& p = (*cs)[i];
        if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() ||
            !p[2].is_number()) {
          throw ConfigError("marker.corners", "each corner must be [x, y, z]");
        }
        corners[i] = Vec3(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
      }
    }
    r.read("side_length", side);
    r.finish();
    cfg.marker = MarkerModel(corners, side);
  }

  if (const json* v = root.find("vehicle")) {
    detail::ObjectReader r(*v, "vehicle");
    r.read("wheelbase", cfg.bicycle.wheelbase);
    r.read("steering_limit", cfg.bicycle.steering_limit);
    r.finish();
  }

  if (const json* f = root.find("filter")) {
    detail::ObjectReader r(*f, "filter");
    auto q = detail::diag_array(cfg.filter_noise.Q);
    auto rr = detail::diag_array(cfg.filter_noise.R);
    std::array<double, 6> p0{};
    for (int i = 0; i < 6; ++i) p0[i] = cfg.p0_diag(i);
    r.read_array("q_diag", q);
    r.read_array("r_diag", rr);
    r.read_array("p0_diag", p0);
    r.finish();
    cfg.filter_noise.Q = detail::diag_matrix(q);
    cfg.filter_noise.R = detail::diag_matrix(rr);
    cfg.p0_diag = Vec6(p0[0], p0[1], p0[2], p0[3], p0[4], p0[5]);
  }

  if (const json* d = root.find("disambiguation")) {
    detail::ObjectReader r(*d, "disambiguation");
    r.read("w2", cfg.w2);
    r.finish();
  }

  double default_radius = 0.10;
  if (const json* c = root.find("controller")) {
    detail::ObjectReader r(*c, "controller");
    r.read("p1", cfg.gains.p1);
    r.read("p2", cfg.gains.p2);
    r.read("u_max", cfg.gains.u_max);
    r.read("waypoint_radius", default_radius);
    r.read("success_tolerance", cfg.success_tolerance);
    r.finish();
    for (auto& w : cfg.waypoints) w.radius = default_radius;
  }

  if (const json* w = root.find("waypoints")) {
    if (!w->is_array()) throw ConfigError("waypoints", "expected an array");
    cfg.waypoints.clear();
    for (std::size_t i = 0; i < w->size(); ++i) {
      detail::ObjectReader r((*w)[i], "waypoints[" + std::to_string(i) + "]");
      const std::string base = "waypoints[" + std::to_string(i) + "]";
      Waypoint wp{0.0, 0.0, default_radius};
      if (!(*w)[i].contains("x") || !(*w)[i].contains("y")) throw ConfigError(base, "x and y required");
      r.read("x", wp.x);
      r.read("y", wp.y);
      r.read("radius", wp.radius);
      r.finish();
      cfg.waypoints.push_back(wp);
    }
  }

  if (const json* p = root.find("initial_pose")) {
    detail::ObjectReader r(*p, "initial_pose");
    r.read("x", cfg.initial_pose.x);
    r.read("y", cfg.initial_pose.y);
    r.read("psi", cfg.initial_pose.psi);
    r.finish();
  }

  if (const json* p = root.find("plant")) {
    detail::ObjectReader r(*p, "plant");
    r.read("k_u", cfg.k_u);
    r.read("tau", cfg.tau);
    r.finish();
  }

  if (const json* l = root.find("lm")) {
    detail::ObjectReader r(*l, "lm");
    r.read("max_iterations", cfg.lm.max_iterations);
    r.finish();
  }

  root.finish();
  cfg.validate();
  return cfg;
}

inline SimConfig config_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  return config_from_json(doc);
}

inline SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_string(ss.str());
}

inline std::string canonical_dump(const SimConfig& cfg) { return to_json(cfg).dump(); }

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const SimConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_dump(cfg))));
  return buf;
}

struct RunReport {
  ScenarioResult result;
  std::string config_hash;
  std::uint64_t seed = 0;
  SelectionPolicy policy = SelectionPolicy::ours;
  double wall_time_s = 0.0;

  bool operator==(const RunReport&) const = default;
};

inline json to_json(const RunReport& r) {
  const ScenarioResult& s = r.result;
  return {{"config_hash", r.config_hash},
          {"seed", r.seed},
          {"policy", std::string(to_string(r.policy))},
          {"wall_time_s", r.wall_time_s},
          {"result",
           {{"waypoints_reached", s.waypoints_reached},
            {"waypoints_total", s.waypoints_total},
            {"steps_used", s.steps_used},
            {"timed_out", s.timed_out},
            {"final_position_error", s.final_position_error},
            {"final_estimation_error", s.final_estimation_error},
            {"visible_steps", s.visible_steps},
            {"selection_accuracy", s.selection_accuracy},
            {"rms_position_error", s.rms_position_error},
            {"rms_yaw_error", s.rms_yaw_error}}}};
}

inline RunReport report_from_json(const json& j) {
  RunReport r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.policy = detail::parse_policy(j.at("policy").get<std::string>(), "policy");
    r.wall_time_s = j.at("wall_time_s").get<double>();
    const json& s = j.at("result");
    r.result.waypoints_reached = s.at("waypoints_reached").get<int>();
    r.result.waypoints_total = s.at("waypoints_total").get<int>();
    r.result.steps_used = s.at("steps_used").get<int>();
    r.result.timed_out = s.at("timed_out").get<bool>();
    r.result.final_position_error = s.at("final_position_error").get<double>();
    r.result.final_estimation_error = s.at("final_estimation_error").get<double>();
    r.result.visible_steps = s.at("visible_steps").get<int>();
    r.result.selection_accuracy = s.at("selection_accuracy").get<double>();
    r.result.rms_position_error = s.at("rms_position_error").get<double>();
    r.result.rms_yaw_error = s.at("rms_yaw_error").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError("report", e.what());
  }
  return r;
}

inline constexpr const char* kTrajectoryHeader =
    "k,t,truth_x,truth_y,truth_psi,est_x,est_y,est_psi,selected,e1_a,e1_b,e2_a,e2_b,e_a,e_b,"
    "delta_rd,u,waypoint_idx";

/// Fixed-format number: 17 significant digits, so values round-trip exactly
/// and identical runs give identical bytes.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trajectory_csv(const SimLog& log) {
  std::string out = kTrajectoryHeader;
  out += "\r\n";
  for (const SimStep& s : log) {
    const PlanarState est = s.posterior.planar();
    std::vector<std::string> f = {std::to_string(s.k),        csv_number(s.t),
                                  csv_number(s.truth.pose.x), csv_number(s.truth.pose.y),
                                  csv_number(s.truth.pose.psi), csv_number(est.x),
                                  csv_number(est.y),          csv_number(est.psi)};
    if (s.selection) {
      const Selection& sel = *s.selection;
      f.emplace_back(to_string(sel.chosen));
      for (double v : {sel.cost_a.e1, sel.cost_b.e1, sel.cost_a.e2, sel.cost_b.e2, sel.cost_a.e,
                       sel.cost_b.e}) {
        f.push_back(csv_number(v));
      }
    } else {
      f.insert(f.end(), 7, "");
    }
    f.push_back(csv_number(s.command.delta_rd));
    f.push_back(csv_number(s.command.throttle));
    f.push_back(std::to_string(s.waypoint_index));
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out += ',';
      out += f[i];
    }
    out += "\r\n";
  }
  return out;
}

inline constexpr const char* kBenchHeader =
    "trial,tilt_deg,e1_a,e1_b,e2_a,e2_b,e_a,e_b,err_a,err_b,nearer,ours,method_a,ours_correct,"
    "method_a_correct";

inline std::string bench_csv(const BenchSummary& summary) {
  std::string out = kBenchHeader;
  out += "\r\n";
  for (const BenchRow& r : summary.rows) {
    out += std::to_string(r.trial) + "," + csv_number(r.tilt * 180.0 / kPi);
    for (double v : {r.cost_a.e1, r.cost_b.e1, r.cost_a.e2, r.cost_b.e2, r.cost_a.e, r.cost_b.e,
                     r.err_a, r.err_b}) {
      out += "," + csv_number(v);
    }
    out += ",";
    if (r.nearer) out += to_string(*r.nearer);
    out += "," + std::string(to_string(r.ours)) + "," + std::string(to_string(r.method_a)) + "," +
           (r.ours_correct ? "1" : "0") + "," + (r.method_a_correct ? "1" : "0") + "\r\n";
  }
  return out;
}

/// Writes to a sibling temporary file, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace marker_nav
