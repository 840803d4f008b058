#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "forcecast/dataset.hpp"
#include "forcecast/geometry.hpp"
#include "forcecast/image.hpp"
#include "forcecast/kinematics.hpp"

namespace forcecast {

inline constexpr double kMaxRotationRad = 20.0 * 3.14159265358979323846 / 180.0;

enum class KinematicKind { kHorizontalFlip, kVerticalFlip, kRotation };

std::string to_string(KinematicKind kind);

/// Paired image / 3D transform. `theta` (radians) is used by rotations only.
struct KinematicAugmentation {
  KinematicKind kind = KinematicKind::kHorizontalFlip;
  double theta = 0.0;
  RigidTransform camera_extrinsic;  ///< camera pose in the robot base frame

  /// Throws ConfigError when theta leaves [-20 deg, 20 deg].
  void validate() const;
  /// The camera-frame map: a diagonal mirror or a rotation about the optical axis.
  Mat3 camera_map() const;
  /// The same map expressed in the robot base frame, acting on free vectors.
  Mat3 base_map() const;
  /// Base-frame affine map of a point.
  Vec3 apply_point(const Vec3& p) const;
  /// Orientation map: A R for rotations, A R A for mirrors (keeps det = +1).
  Quaternion apply_orientation(const Quaternion& q) const;
};

/// Flips or rotates every frame and applies the matching 3D map to each state,
/// its neighbour sample, the force label and the wrench. Robot joints are re-solved
/// by IK seeded at the old joints; on failure the window comes back flagged.
/// Haptic joints are left as recorded.
SampleWindow apply_kinematic(const KinematicAugmentation& aug, const SampleWindow& window,
                             const KinematicChain& chain, const IkOptions& ik = {});

/// The state and label half of apply_kinematic; images are neither loaded nor touched.
SampleWindow apply_kinematic_states(const KinematicAugmentation& aug, const SampleWindow& window,
                                    const KinematicChain& chain, const IkOptions& ik = {});

/// The image half: exact flip, or bilinear rotation about the center with black fill.
ImageF apply_kinematic_image(const KinematicAugmentation& aug, const ImageF& image);

struct PhotometricParams {
  double brightness = 1.0;
  double contrast = 1.0;
  double zoom = 1.0;

  /// Throws ConfigError outside brightness/contrast [0.7, 1.3], zoom [1.0, 1.2].
  void validate() const;
};

/// Center zoom, then out = clamp(contrast (in - 0.5) + 0.5 + (brightness - 1), 0, 1).
ImageF apply_photometric(const ImageF& image, const PhotometricParams& params);

/// Per-window augmentation draw, recorded so runs can be audited.
struct AugmentationRecord {
  bool kinematic = false;
  KinematicKind kind = KinematicKind::kHorizontalFlip;
  double theta = 0.0;
  bool photometric = false;
  PhotometricParams photo;

  std::string to_json() const;
};

struct AugmentationProbabilities {
  double kinematic = 0.5;
  double photometric = 0.5;
};

/// Draws one record. Flip kinds and the rotation are equally likely; theta is uniform.
AugmentationRecord sample_augmentation(std::mt19937_64& rng, const AugmentationProbabilities& probs);

/// Applies a record to a whole window (same parameters for all 5 frames and states).
SampleWindow apply_augmentation(const AugmentationRecord& record, const SampleWindow& window,
                                const KinematicChain& chain, const RigidTransform& camera_extrinsic);

/// Image ops of a record (kinematic, then photometric) on one frame of any size.
ImageF augment_image(const AugmentationRecord& record, const ImageF& image);

}  // namespace forcecast
