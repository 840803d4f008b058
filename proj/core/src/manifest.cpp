#include "forcecast/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

using nlohmann::json;

json transform_to_json(const RigidTransform& t) {
  std::vector<double> r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(t.rotation()(i, j));
  }
  return {{"rotation", r}, {"translation", {t.translation().x(), t.translation().y(), t.translation().z()}}};
}

RigidTransform transform_from_json(const json& j) {
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto t = j.at("translation").get<std::vector<double>>();
  if (r.size() != 9 || t.size() != 3) throw ConfigError("transform needs 9 rotation and 3 translation values");
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) m(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
  }
  return {m, Vec3(t[0], t[1], t[2])};
}

Vec3 vec3_from_json(const json& j, const char* field) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError(std::string(field) + " must have 3 components");
  return {v[0], v[1], v[2]};
}

}  // namespace

Eigen::Vector3d CameraModel::project(const Vec3& point_in_base) const {
  const Vec3 p = invert(extrinsic).apply(point_in_base);
  return {focal_px * p.x() / p.z() + cx, focal_px * p.y() / p.z() + cy, p.z()};
}

Vec3 CameraModel::back_project(double u, double v, double depth) const {
  const Vec3 p((u - cx) * depth / focal_px, (v - cy) * depth / focal_px, depth);
  return extrinsic.apply(p);
}

void DatasetManifest::validate() const {
  if (name.empty()) throw ConfigError("manifest field 'name' must not be empty");
  if (!(video_rate_hz > 0.0)) throw ConfigError("manifest field 'video_rate_hz' must be > 0");
  if (!(state_rate_hz > 0.0)) throw ConfigError("manifest field 'state_rate_hz' must be > 0");
  if (state_rate_hz < video_rate_hz) throw ConfigError("manifest field 'state_rate_hz' must be >= video_rate_hz");
  if (!(image_zoom >= 1.0)) throw ConfigError("manifest field 'image_zoom' must be >= 1");
  validate_layout(layout);
  (void)kinematic_chain();
  calibration.validate();
  if (!(camera.focal_px > 0.0)) throw ConfigError("manifest field 'camera.focal_px' must be > 0");
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "forcecast-manifest";
  j["version"] = 1;
  j["name"] = m.name;
  j["quaternion_convention"] = "wxyz";
  j["video_rate_hz"] = m.video_rate_hz;
  j["state_rate_hz"] = m.state_rate_hz;
  json layout = json::object();
  for (const auto& [field, range] : m.layout) layout[std::string(field_name(field))] = {range.begin, range.end};
  j["layout"] = layout;
  json joints = json::array();
  for (const auto& jt : m.chain) {
    joints.push_back({{"a", jt.a},
                      {"alpha", jt.alpha},
                      {"d", jt.d},
                      {"theta_offset", jt.theta_offset},
                      {"limits", {jt.min_angle, jt.max_angle}}});
  }
  j["chain"] = {{"base", transform_to_json(m.chain_base)}, {"joints", joints}};
  const auto& c = m.calibration;
  j["calibration"] = {
      {"attenuation", c.attenuation},
      {"gravity_comp", {c.gravity_comp.x(), c.gravity_comp.y(), c.gravity_comp.z()}},
      {"tool_bias", {c.tool_bias.x(), c.tool_bias.y(), c.tool_bias.z()}},
      {"gravity_mode", c.gravity_mode == GravityMode::kInverseRotation ? "inverse_rotation" : "rotation"}};
  j["image_zoom"] = m.image_zoom;
  j["camera"] = {{"focal_px", m.camera.focal_px}, {"cx", m.camera.cx},         {"cy", m.camera.cy},
                 {"width", m.camera.width},       {"height", m.camera.height}, {"extrinsic", transform_to_json(m.camera.extrinsic)}};
  j["metadata"] = m.metadata;
  json clips = json::array();
  for (const auto& clip : m.clips) {
    clips.push_back({{"path", clip.path},
                     {"material", clip.tags.material},
                     {"structure", clip.tags.structure},
                     {"position", clip.tags.position}});
  }
  j["clips"] = clips;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::filesystem::path& root) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest parse error: ") + e.what());
  }
  DatasetManifest m;
  m.root = root;
  try {
    m.name = j.at("name").get<std::string>();
    m.video_rate_hz = j.at("video_rate_hz").get<double>();
    m.state_rate_hz = j.at("state_rate_hz").get<double>();
    if (j.contains("quaternion_convention") && j["quaternion_convention"] != "wxyz") {
      throw ConfigError("manifest field 'quaternion_convention' must be \"wxyz\"");
    }
    if (j.contains("layout")) {
      m.layout.clear();
      for (const auto& [key, value] : j["layout"].items()) {
        const auto field = parse_field(key);
        if (!field) throw ConfigError("manifest layout names unknown state field '" + key + "'");
        const auto r = value.get<std::vector<std::size_t>>();
        if (r.size() != 2) throw ConfigError("manifest layout entry '" + key + "' must be [begin, end]");
        m.layout[*field] = {r[0], r[1]};
      }
    }
    const json& chain = j.at("chain");
    if (chain.contains("base")) m.chain_base = transform_from_json(chain["base"]);
    for (const auto& jt : chain.at("joints")) {
      DhJoint d;
      d.a = jt.value("a", 0.0);
      d.alpha = jt.value("alpha", 0.0);
      d.d = jt.value("d", 0.0);
      d.theta_offset = jt.value("theta_offset", 0.0);
      if (jt.contains("limits")) {
        const auto lim = jt["limits"].get<std::vector<double>>();
        if (lim.size() != 2) throw ConfigError("manifest joint limits must be [min, max]");
        d.min_angle = lim[0];
        d.max_angle = lim[1];
      }
      m.chain.push_back(d);
    }
    if (j.contains("calibration")) {
      const json& c = j["calibration"];
      m.calibration.attenuation = c.value("attenuation", 1.0);
      if (c.contains("gravity_comp")) m.calibration.gravity_comp = vec3_from_json(c["gravity_comp"], "gravity_comp");
      if (c.contains("tool_bias")) m.calibration.tool_bias = vec3_from_json(c["tool_bias"], "tool_bias");
      const std::string mode = c.value("gravity_mode", "inverse_rotation");
      if (mode == "inverse_rotation") {
        m.calibration.gravity_mode = GravityMode::kInverseRotation;
      } else if (mode == "rotation") {
        m.calibration.gravity_mode = GravityMode::kRotation;
      } else {
        throw ConfigError("manifest field 'calibration.gravity_mode' must be inverse_rotation or rotation");
      }
    }
    m.image_zoom = j.value("image_zoom", 1.0);
    if (j.contains("camera")) {
      const json& c = j["camera"];
      m.camera.focal_px = c.value("focal_px", m.camera.focal_px);
      m.camera.cx = c.value("cx", m.camera.cx);
      m.camera.cy = c.value("cy", m.camera.cy);
      m.camera.width = c.value("width", m.camera.width);
      m.camera.height = c.value("height", m.camera.height);
      if (c.contains("extrinsic")) m.camera.extrinsic = transform_from_json(c["extrinsic"]);
    }
    if (j.contains("metadata")) m.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    for (const auto& c : j.at("clips")) {
      ClipEntry e;
      e.path = c.at("path").get<std::string>();
      e.tags.material = c.value("material", "");
      e.tags.structure = c.value("structure", "");
      e.tags.position = c.value("position", "");
      m.clips.push_back(e);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest field error: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("manifest not found: " + path.string());
  DatasetManifest m = manifest_from_json(read_text_file(path), path.parent_path());
  for (std::size_t i = 0; i < m.clips.size(); ++i) {
    if (!std::filesystem::is_directory(m.clip_dir(i))) {
      throw DataError("manifest clip directory missing: " + m.clip_dir(i).string());
    }
  }
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  write_text_file(path, manifest_to_json(manifest));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace forcecast
