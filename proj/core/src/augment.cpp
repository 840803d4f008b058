#include "forcecast/augment.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

bool is_mirror(KinematicKind kind) { return kind != KinematicKind::kRotation; }

void transform_raw(const KinematicAugmentation& aug, RawState& s) {
  s.ee_position = aug.apply_point(s.ee_position);
  s.ee_orientation = aug.apply_orientation(s.ee_orientation);
  s.haptic_position = aug.apply_point(s.haptic_position);
  s.haptic_orientation = aug.apply_orientation(s.haptic_orientation);
  if (s.wrench) {
    const Mat3 a = aug.base_map();
    const double sign = is_mirror(aug.kind) ? -1.0 : 1.0;  // torque is a pseudovector
    auto& w = *s.wrench;
    const Vec3 f = a * Vec3(w[0], w[1], w[2]);
    const Vec3 t = sign * (a * Vec3(w[3], w[4], w[5]));
    w = {f.x(), f.y(), f.z(), t.x(), t.y(), t.z()};
  }
}

// Returns false when IK could not reach the pose.
bool resolve_joints(const KinematicChain& chain, RawState& s, const IkOptions& ik) {
  try {
    s.robot_joints = inverse(chain, Pose{s.ee_position, s.ee_orientation}, s.robot_joints, ik);
    return true;
  } catch (const UnreachablePoseError&) {
    return false;
  }
}

ImageF transform_image(const KinematicAugmentation& aug, const ImageF& image) {
  switch (aug.kind) {
    case KinematicKind::kHorizontalFlip:
      return flip_horizontal(image);
    case KinematicKind::kVerticalFlip:
      return flip_vertical(image);
    case KinematicKind::kRotation:
      return rotate_image(image, aug.theta);
  }
  return image;
}

}  // namespace

std::string to_string(KinematicKind kind) {
  switch (kind) {
    case KinematicKind::kHorizontalFlip:
      return "horizontal_flip";
    case KinematicKind::kVerticalFlip:
      return "vertical_flip";
    case KinematicKind::kRotation:
      return "rotation";
  }
  return "rotation";
}

void KinematicAugmentation::validate() const {
  if (!(std::abs(theta) <= kMaxRotationRad + 1e-12)) {
    throw ConfigError("augmentation rotation " + std::to_string(theta) + " rad is outside [-20, 20] degrees");
  }
}

Mat3 KinematicAugmentation::camera_map() const {
  Mat3 m = Mat3::Identity();
  switch (kind) {
    case KinematicKind::kHorizontalFlip:
      m(0, 0) = -1.0;
      break;
    case KinematicKind::kVerticalFlip:
      m(1, 1) = -1.0;
      break;
    case KinematicKind::kRotation: {
      const double c = std::cos(theta), s = std::sin(theta);
      m << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
      break;
    }
  }
  return m;
}

Mat3 KinematicAugmentation::base_map() const {
  const Mat3& r = camera_extrinsic.rotation();
  return r * camera_map() * r.transpose();
}

Vec3 KinematicAugmentation::apply_point(const Vec3& p) const {
  const Vec3& t = camera_extrinsic.translation();
  return base_map() * (p - t) + t;
}

Quaternion KinematicAugmentation::apply_orientation(const Quaternion& q) const {
  const Mat3 a = base_map();
  const Mat3 r = quat_to_matrix(q);
  Mat3 out = is_mirror(kind) ? Mat3(a * r * a) : Mat3(a * r);
  // Re-orthonormalize so round trips stay inside matrix_to_quat's tolerance.
  Eigen::JacobiSVD<Mat3> svd(out, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out = svd.matrixU() * svd.matrixV().transpose();
  return matrix_to_quat(out);
}

SampleWindow apply_kinematic(const KinematicAugmentation& aug, const SampleWindow& window,
                             const KinematicChain& chain, const IkOptions& ik) {
  aug.validate();
  if (aug.kind == KinematicKind::kRotation && aug.theta == 0.0) return window;
  SampleWindow out = apply_kinematic_states(aug, window, chain, ik);
  std::vector<ImageF> images = window_images(window);
  for (auto& image : images) image = transform_image(aug, image);
  out.images = std::move(images);
  return out;
}

ImageF apply_kinematic_image(const KinematicAugmentation& aug, const ImageF& image) {
  aug.validate();
  if (aug.kind == KinematicKind::kRotation && aug.theta == 0.0) return image;
  return transform_image(aug, image);
}

SampleWindow apply_kinematic_states(const KinematicAugmentation& aug, const SampleWindow& window,
                                    const KinematicChain& chain, const IkOptions& ik) {
  aug.validate();
  if (aug.kind == KinematicKind::kRotation && aug.theta == 0.0) return window;

  SampleWindow out = window;
  const StateLayout& layout = window.clip->manifest->layout;
  for (auto& ws : out.states) {
    transform_raw(aug, ws.state);
    transform_raw(aug, ws.neighbor);
    if (!resolve_joints(chain, ws.state, ik) || !resolve_joints(chain, ws.neighbor, ik)) out.flagged = true;
    ws.generalized = generalize_state(ws.state, ws.derivatives(), layout);
  }
  out.target = aug.base_map() * window.target;
  return out;
}

void PhotometricParams::validate() const {
  auto check = [](const char* name, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) {
      throw ConfigError(std::string("photometric ") + name + " " + std::to_string(v) + " is outside [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  };
  check("brightness", brightness, 0.7, 1.3);
  check("contrast", contrast, 0.7, 1.3);
  check("zoom", zoom, 1.0, 1.2);
}

ImageF apply_photometric(const ImageF& image, const PhotometricParams& params) {
  params.validate();
  ImageF out = center_zoom(image, params.zoom);
  if (params.brightness == 1.0 && params.contrast == 1.0) return out;
  const double shift = 0.5 + (params.brightness - 1.0);
  for (auto& v : out.data) {
    v = static_cast<float>(std::clamp(params.contrast * (v - 0.5) + shift, 0.0, 1.0));
  }
  return out;
}

std::string AugmentationRecord::to_json() const {
  nlohmann::json j;
  j["kinematic"] = kinematic;
  if (kinematic) {
    j["kind"] = to_string(kind);
    j["theta"] = theta;
  }
  j["photometric"] = photometric;
  if (photometric) {
    j["brightness"] = photo.brightness;
    j["contrast"] = photo.contrast;
    j["zoom"] = photo.zoom;
  }
  return j.dump();
}

AugmentationRecord sample_augmentation(std::mt19937_64& rng, const AugmentationProbabilities& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AugmentationRecord r;
  r.kinematic = u(rng) < probs.kinematic;
  const double kind_draw = u(rng);
  const double theta_draw = u(rng);
  if (r.kinematic) {
    r.kind = kind_draw < 1.0 / 3.0   ? KinematicKind::kHorizontalFlip
             : kind_draw < 2.0 / 3.0 ? KinematicKind::kVerticalFlip
                                     : KinematicKind::kRotation;
    if (r.kind == KinematicKind::kRotation) r.theta = (2.0 * theta_draw - 1.0) * kMaxRotationRad;
  }
  r.photometric = u(rng) < probs.photometric;
  const double b = u(rng), c = u(rng), z = u(rng);
  if (r.photometric) {
    r.photo.brightness = 0.7 + 0.6 * b;
    r.photo.contrast = 0.7 + 0.6 * c;
    r.photo.zoom = 1.0 + 0.2 * z;
  }
  return r;
}

SampleWindow apply_augmentation(const AugmentationRecord& record, const SampleWindow& window,
                                const KinematicChain& chain, const RigidTransform& camera_extrinsic) {
  SampleWindow out = window;
  if (record.kinematic) {
    out = apply_kinematic(KinematicAugmentation{record.kind, record.theta, camera_extrinsic}, window, chain);
  }
  if (record.photometric) {
    std::vector<ImageF> images = window_images(out);
    for (auto& image : images) image = apply_photometric(image, record.photo);
    out.images = std::move(images);
  }
  return out;
}

ImageF augment_image(const AugmentationRecord& record, const ImageF& image) {
  ImageF out = record.kinematic ? apply_kinematic_image({record.kind, record.theta, {}}, image) : image;
  return record.photometric ? apply_photometric(out, record.photo) : out;
}

}  // namespace forcecast
