#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "forcecast/calibration.hpp"
#include "forcecast/geometry.hpp"
#include "forcecast/kinematics.hpp"
#include "forcecast/state.hpp"

namespace forcecast {

/// Pinhole camera. `extrinsic` is the camera pose in the robot base frame;
/// the camera looks along +z with x to the image right and y down.
struct CameraModel {
  double focal_px = 600.0;
  double cx = 159.5;
  double cy = 159.5;
  int width = 320;
  int height = 320;
  RigidTransform extrinsic;

  /// Pixel coordinates of a base-frame point, plus its depth along the optical axis.
  Eigen::Vector3d project(const Vec3& point_in_base) const;
  /// Base-frame point on the ray through pixel (u, v) at the given depth.
  Vec3 back_project(double u, double v, double depth) const;
};

struct ClipTags {
  std::string material;
  std::string structure;
  std::string position;
  bool operator==(const ClipTags&) const = default;
};

struct ClipEntry {
  std::string path;  ///< relative to the manifest directory
  ClipTags tags;
};

/// Everything needed to ingest one dataset into the unified schema.
struct DatasetManifest {
  std::string name;
  std::vector<ClipEntry> clips;
  double video_rate_hz = 30.0;
  double state_rate_hz = 200.0;
  StateLayout layout = canonical_layout();
  std::vector<DhJoint> chain;
  RigidTransform chain_base;
  CalibrationParams calibration;
  double image_zoom = 1.0;
  CameraModel camera;
  std::map<std::string, std::string> metadata;

  /// Directory the manifest was loaded from; clip paths resolve against it. Not serialized.
  std::filesystem::path root;

  KinematicChain kinematic_chain() const { return KinematicChain(chain, chain_base); }
  std::filesystem::path clip_dir(std::size_t index) const { return root / clips.at(index).path; }

  /// Checks rates, layout, chain, calibration and zoom. Throws ConfigError.
  void validate() const;
};

std::string manifest_to_json(const DatasetManifest& manifest);
/// Parses and validates; throws DataError on malformed JSON and ConfigError on invalid content.
DatasetManifest manifest_from_json(const std::string& text, const std::filesystem::path& root = {});

/// Loads, validates and checks that every clip directory exists.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace forcecast
