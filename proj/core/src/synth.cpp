#include "forcecast/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <random>
#include <thread>

#include "forcecast/errors.hpp"

namespace forcecast {
namespace {

constexpr double kPi = std::numbers::pi;

// Small deterministic sampler; std distributions differ across standard libraries.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix(splitmix(seed ^ splitmix(a + 1)) ^ splitmix(b + 0x51ed));
}

bool is_integer_count(double x) { return std::abs(x - std::round(x)) < 1e-9 && x >= 1.0; }

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image render_background(const SynthConfig& config) {
  const int w = config.camera.width;
  const int h = config.camera.height;
  Image image(w, h);
  Sampler rng(config.texture_seed);
  const double p1 = rng.uniform(0.0, 2.0 * kPi);
  const double p2 = rng.uniform(0.0, 2.0 * kPi);
  const double p3 = rng.uniform(0.0, 2.0 * kPi);
  const double f1 = rng.uniform(0.08, 0.14);
  const double f2 = rng.uniform(0.05, 0.09);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double shade = 0.75 + 0.12 * std::sin(f1 * x + p1) * std::sin(f2 * y + p2) +
                           0.08 * std::sin(0.031 * (x + y) + p3);
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = to_byte(config.background_tint[c] * shade);
    }
  }
  return image;
}

struct RenderContext {
  std::shared_ptr<const Image> background;
  std::vector<Eigen::Vector3d> tips;  // u, v, radius in pixels
  std::vector<double> brightness;
};

Image render_frame(const RenderContext& ctx, std::size_t index) {
  Image image = *ctx.background;
  const Eigen::Vector3d& tip = ctx.tips.at(index);
  const double r = tip.z();
  const double level = ctx.brightness[index];
  const int x0 = std::max(0, static_cast<int>(std::floor(tip.x() - r - 1)));
  const int x1 = std::min(image.width - 1, static_cast<int>(std::ceil(tip.x() + r + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(tip.y() - r - 1)));
  const int y1 = std::min(image.height - 1, static_cast<int>(std::ceil(tip.y() + r + 1)));
  static constexpr std::array<double, 3> kToolColor = {0.92, 0.93, 0.98};
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d = std::hypot(x - tip.x(), y - tip.y());
      // One pixel of antialiasing at the rim.
      const double cover = std::clamp(r + 0.5 - d, 0.0, 1.0);
      if (cover <= 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        const double bg = image.at(x, y, c) / 255.0;
        image.at(x, y, c) = to_byte((1.0 - cover) * bg + cover * kToolColor[c] * level);
      }
    }
  }
  return image;
}

Quaternion yawed(const Quaternion& base, double yaw) {
  return Quaternion::from_axis_angle(Vec3::UnitZ(), yaw) * base;
}

}  // namespace

Vec3 contact_force(double penetration, double penetration_rate, const Eigen::Vector2d& tangential_velocity,
                   const ContactParams& params) {
  if (penetration <= 0.0) return Vec3::Zero();
  double fz = params.stiffness * penetration + params.damping * penetration_rate;
  if (params.inclusion_stiffness > 0.0 && penetration > params.inclusion_depth) {
    fz += params.inclusion_stiffness * (penetration - params.inclusion_depth);
  }
  Vec3 f(0.0, 0.0, fz);
  const double speed = tangential_velocity.norm();
  if (speed > 0.0 && params.friction > 0.0) {
    const double mag = params.friction * std::abs(fz) * std::tanh(speed / params.slip_velocity);
    f.x() = -mag * tangential_velocity.x() / speed;
    f.y() = -mag * tangential_velocity.y() / speed;
  }
  return f;
}

BSplineTrajectory::BSplineTrajectory(std::vector<Eigen::Vector4d> control_points, double knot_spacing)
    : points_(std::move(control_points)), spacing_(knot_spacing) {
  if (points_.size() < 4) throw ConfigError("a cubic B-spline needs at least 4 control points");
  if (!(knot_spacing > 0.0) || !std::isfinite(knot_spacing)) throw ConfigError("knot_spacing must be positive");
}

double BSplineTrajectory::duration() const { return static_cast<double>(points_.size() - 3) * spacing_; }

Eigen::Vector4d BSplineTrajectory::evaluate(double t, int derivative) const {
  if (derivative < 0 || derivative > 2) throw ConfigError("B-spline derivative order must be 0, 1 or 2");
  const double u = std::clamp(t, 0.0, duration()) / spacing_;
  const auto last = static_cast<double>(points_.size() - 4);
  const double seg = std::min(std::floor(u), last);
  const double s = u - seg;
  const auto i = static_cast<std::size_t>(seg);
  std::array<double, 4> b{};
  switch (derivative) {
    case 0:
      b = {(1 - s) * (1 - s) * (1 - s) / 6.0, (3 * s * s * s - 6 * s * s + 4) / 6.0,
           (-3 * s * s * s + 3 * s * s + 3 * s + 1) / 6.0, s * s * s / 6.0};
      break;
    case 1:
      b = {-(1 - s) * (1 - s) / 2.0, (3 * s * s - 4 * s) / 2.0, (-3 * s * s + 2 * s + 1) / 2.0, s * s / 2.0};
      break;
    default:
      b = {1 - s, 3 * s - 2, 1 - 3 * s, s};
      break;
  }
  Eigen::Vector4d out = Eigen::Vector4d::Zero();
  for (int k = 0; k < 4; ++k) out += b[k] * points_[i + k];
  return out / std::pow(spacing_, derivative);
}

void SynthConfig::validate() const {
  if (!(duration > 0.0)) throw ConfigError("duration must be positive");
  if (!(video_rate_hz > 0.0) || !(state_rate_hz > 0.0)) throw ConfigError("rates must be positive");
  if (!is_integer_count(duration * video_rate_hz)) throw ConfigError("duration * video_rate_hz must be an integer");
  if (!is_integer_count(duration * state_rate_hz)) throw ConfigError("duration * state_rate_hz must be an integer");
  if (state_rate_hz < video_rate_hz) throw ConfigError("state_rate_hz must be at least video_rate_hz");
  if (!(contact.stiffness > 0.0)) throw ConfigError("contact.stiffness must be positive");
  if (contact.damping < 0.0) throw ConfigError("contact.damping must be non-negative");
  if (contact.friction < 0.0) throw ConfigError("contact.friction must be non-negative");
  if (!(contact.slip_velocity > 0.0)) throw ConfigError("contact.slip_velocity must be positive");
  if (contact.inclusion_stiffness < 0.0 || contact.inclusion_depth < 0.0)
    throw ConfigError("contact inclusion parameters must be non-negative");
  if (tool_mass < 0.0) throw ConfigError("tool_mass must be non-negative");
  if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be non-negative");
  if (control_points.size() < 4) throw ConfigError("control_points needs at least 4 entries");
  if (!(knot_spacing > 0.0)) throw ConfigError("knot_spacing must be positive");
  if ((static_cast<double>(control_points.size()) - 3.0) * knot_spacing < duration - 1e-9)
    throw ConfigError("control_points do not cover the clip duration");
  if (chain.size() != 6 && chain.size() != 7) throw ConfigError("chain must have 6 or 7 joints");
  if (home_joints.size() != chain.size()) throw ConfigError("home_joints length must match the chain");
  if (haptic_joint_count < 1 || haptic_joint_count > 7) throw ConfigError("haptic_joint_count must be in [1, 7]");
  if (with_wrench && (!(wrench_lag > 0.0) || wrench_noise < 0.0)) throw ConfigError("invalid wrench channel settings");
  if (!(tool_radius > 0.0)) throw ConfigError("tool_radius must be positive");
  if (!(brightness_reference > 0.0)) throw ConfigError("brightness_reference must be positive");
  if (camera.width < kCropSize || camera.height < kCropSize)
    throw ConfigError("camera resolution must be at least the crop size");
  calibration.validate();
}

SynthClip generate_clip(const SynthConfig& config) {
  config.validate();
  const KinematicChain chain(config.chain, config.chain_base);
  const BSplineTrajectory traj(config.control_points, config.knot_spacing);

  const auto n_states = static_cast<std::size_t>(std::llround(config.duration * config.state_rate_hz));
  const auto n_frames = static_cast<std::size_t>(std::llround(config.duration * config.video_rate_hz));
  const double dt = 1.0 / config.state_rate_hz;

  SynthClip clip;
  clip.name = config.name;
  clip.tags = config.tags;
  clip.states.reserve(n_states);
  clip.ground_truth.reserve(n_states);
  clip.raw_forces.reserve(n_states);

  Sampler noise(derive_seed(config.seed, 1));
  Sampler wrench_noise(derive_seed(config.seed, 2));
  Sampler haptic_rng(derive_seed(config.seed, 3));
  const double gripper_phase = haptic_rng.uniform(0.0, 2.0 * kPi);
  std::array<Vec3, 7> haptic_axes;
  for (auto& a : haptic_axes) a = Vec3(haptic_rng.uniform(-1, 1), haptic_rng.uniform(-1, 1), haptic_rng.uniform(-1, 1));

  std::vector<double> penetration(n_states);
  JointVector q = config.home_joints;
  Vec3 filtered = Vec3::Zero();
  const double alpha = dt / (config.wrench_lag + dt);

  for (std::size_t i = 0; i < n_states; ++i) {
    const double t = static_cast<double>(i) * dt;
    const Eigen::Vector4d x = traj.evaluate(t, 0);
    const Eigen::Vector4d v = traj.evaluate(t, 1);
    const Eigen::Vector4d a = traj.evaluate(t, 2);

    Pose pose;
    pose.position = x.head<3>();
    pose.orientation = yawed(config.tool_orientation, x[3]);
    try {
      q = inverse(chain, pose, q);
    } catch (const UnreachablePoseError& e) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "trajectory unreachable at t=%.3f s: ", t);
      throw ConfigError(buf + std::string(e.what()));
    }

    const double delta = config.contact.surface_height - x.z();
    penetration[i] = delta;
    Vec3 f = contact_force(delta, -v.z(), Eigen::Vector2d(v.x(), v.y()), config.contact);
    f -= config.tool_mass * a.head<3>();

    RawState s;
    s.timestamp = t;
    s.ee_position = pose.position;
    s.ee_orientation = pose.orientation;
    s.robot_joints = q;
    s.haptic_position = config.haptic_scale * (pose.position - config.haptic_anchor) + config.haptic_offset;
    s.haptic_orientation = pose.orientation;
    s.haptic_joints.resize(static_cast<std::size_t>(config.haptic_joint_count));
    for (int k = 0; k < config.haptic_joint_count; ++k) {
      s.haptic_joints[k] = std::sin(haptic_axes[k].dot(s.haptic_position) * 4.0 + 0.3 * k) + 0.5 * x[3];
    }
    if (config.with_wrench) {
      filtered += alpha * (f - filtered);
      std::array<double, 6> w{};
      // Torque from a 5 cm lever along the tool axis.
      const Vec3 lever = quat_to_matrix(pose.orientation) * Vec3(0.0, 0.0, 0.05);
      const Vec3 torque = lever.cross(filtered);
      for (int k = 0; k < 3; ++k) {
        w[k] = filtered[k] + config.wrench_noise * wrench_noise.normal();
        w[3 + k] = torque[k] + 0.1 * config.wrench_noise * wrench_noise.normal();
      }
      s.wrench = w;
    }
    if (config.with_gripper) s.gripper = 0.2 + 0.05 * std::sin(2.0 * kPi * 0.1 * t + gripper_phase);

    const RigidTransform tf = RigidTransform::from_pose(pose);
    Vec3 raw = uncalibrate_force(f, tf, config.calibration);
    if (config.noise_sigma > 0.0) {
      for (int k = 0; k < 3; ++k) raw[k] += config.noise_sigma * noise.normal();
    }
    clip.states.push_back(std::move(s));
    clip.ground_truth.push_back(f);
    clip.raw_forces.push_back(raw);
  }

  auto ctx = std::make_shared<RenderContext>();
  ctx->background = std::make_shared<const Image>(render_background(config));
  clip.background = ctx->background;
  const double off_x = (config.camera.width - kCropSize) / 2;
  const double off_y = (config.camera.height - kCropSize) / 2;
  clip.frame_times.resize(n_frames);
  clip.tip_pixels.resize(n_frames);
  for (std::size_t j = 0; j < n_frames; ++j) {
    const double t = static_cast<double>(j) / config.video_rate_hz;
    const auto si = std::min(n_states - 1, static_cast<std::size_t>(std::llround(t * config.state_rate_hz)));
    const Eigen::Vector3d uvd = config.camera.project(clip.states[si].ee_position);
    if (!(uvd.z() > 0.0)) throw ConfigError("tool leaves the camera frustum (behind the camera)");
    const double r = config.tool_radius * config.camera.focal_px / uvd.z();
    if (uvd.x() - r < off_x || uvd.x() + r > off_x + kCropSize - 1 || uvd.y() - r < off_y ||
        uvd.y() + r > off_y + kCropSize - 1) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "tool leaves the camera frustum crop at frame %zu (u=%.1f, v=%.1f)", j, uvd.x(),
                    uvd.y());
      throw ConfigError(buf);
    }
    clip.frame_times[j] = t;
    clip.tip_pixels[j] = uvd;
    ctx->tips.emplace_back(uvd.x(), uvd.y(), r);
    ctx->brightness.push_back(0.35 + 0.65 * std::clamp(penetration[si] / config.brightness_reference, 0.0, 1.0));
  }
  clip.render = [ctx](std::size_t index) { return render_frame(*ctx, index); };
  return clip;
}

std::vector<Eigen::Vector4d> plan_palpation(std::uint64_t seed, const Vec3& center, double surface_height,
                                            double duration, double knot_spacing, double min_press_gap) {
  if (!(duration > 0.0) || !(knot_spacing > 0.0)) throw ConfigError("duration and knot_spacing must be positive");
  if (!(min_press_gap > 0.0)) throw ConfigError("min_press_gap must be positive");
  Sampler rng(derive_seed(seed, 7));
  const double hover = surface_height + 0.01;

  struct Press {
    double center, half_width, depth;
  };
  std::vector<Press> presses;
  double tc = rng.uniform(1.2, 3.0);
  for (;;) {
    const double w = rng.uniform(0.3, 0.8);
    const double d = rng.uniform(0.003, 0.009);
    if (tc + w > duration - 0.3) break;
    presses.push_back({tc, w, d});
    tc += min_press_gap + rng.uniform(0.0, 2.5);
  }

  const double fx1 = rng.uniform(0.05, 0.15), fx2 = rng.uniform(0.05, 0.15);
  const double px1 = rng.uniform(0.0, 2 * kPi), px2 = rng.uniform(0.0, 2 * kPi);
  const double fyaw = rng.uniform(0.05, 0.15), pyaw = rng.uniform(0.0, 2 * kPi);
  const double ax = rng.uniform(0.008, 0.015), ay = rng.uniform(0.008, 0.015);

  const auto count = static_cast<std::size_t>(std::ceil(duration / knot_spacing - 1e-9)) + 3;
  std::vector<Eigen::Vector4d> points(count);
  for (std::size_t j = 0; j < count; ++j) {
    // Control point j sits under the curve at t = (j - 1) h.
    const double t = (static_cast<double>(j) - 1.0) * knot_spacing;
    double z = hover;
    for (const Press& p : presses) {
      if (std::abs(t - p.center) < p.half_width) {
        const double bump = 0.5 * (1.0 + std::cos(kPi * (t - p.center) / p.half_width));
        z = std::min(z, hover - (hover - (surface_height - p.depth)) * bump);
      }
    }
    points[j] = Eigen::Vector4d(center.x() + ax * std::sin(2 * kPi * fx1 * t + px1),
                                center.y() + ay * std::sin(2 * kPi * fx2 * t + px2), z,
                                0.08 * std::sin(2 * kPi * fyaw * t + pyaw));
  }
  return points;
}

Dataset SynthDataset::to_dataset() const {
  Dataset ds;
  auto manifest_ptr = std::make_shared<const DatasetManifest>(manifest);
  ds.manifest = manifest_ptr;
  for (const SynthClip& sc : clips) {
    auto clip = std::make_shared<Clip>();
    clip->id = manifest.name + "/" + sc.name;
    clip->tags = sc.tags;
    clip->manifest = manifest_ptr;
    clip->raw_states = sc.states;
    clip->forces.reserve(sc.states.size());
    for (std::size_t i = 0; i < sc.states.size(); ++i) {
      const Pose pose{sc.states[i].ee_position, sc.states[i].ee_orientation};
      clip->forces.push_back(calibrate_force(sc.raw_forces[i], RigidTransform::from_pose(pose), manifest.calibration));
    }
    clip->frames.reserve(sc.frame_times.size());
    for (std::size_t j = 0; j < sc.frame_times.size(); ++j) {
      auto render = sc.render;
      clip->frames.push_back({sc.frame_times[j], FrameSource(std::function<Image()>([render, j] { return render(j); }))});
    }
    generalize_clip(*clip);
    clip->validate();
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

namespace {

ContactParams material_contact(const std::string& material, const std::string& structure, double surface) {
  ContactParams c;
  c.surface_height = surface;
  if (material == "soft") {
    c.stiffness = 150.0;
    c.damping = 2.0;
  } else if (material == "stiff") {
    c.stiffness = 400.0;
    c.damping = 6.0;
  } else {
    throw ConfigError("unknown material '" + material + "' (expected soft or stiff)");
  }
  if (structure == "double") {
    c.inclusion_depth = 0.004;
    c.inclusion_stiffness = c.stiffness;
  } else if (structure != "single") {
    throw ConfigError("unknown structure '" + structure + "' (expected single or double)");
  }
  return c;
}

std::vector<DhJoint> ur5_chain() {
  const double h = kPi / 2;
  const double lim = 2 * kPi;
  return {{0.0, h, 0.089159, 0.0, -lim, lim},  {-0.425, 0.0, 0.0, 0.0, -lim, lim},
          {-0.39225, 0.0, 0.0, 0.0, -lim, lim}, {0.0, h, 0.10915, 0.0, -lim, lim},
          {0.0, -h, 0.09465, 0.0, -lim, lim},   {0.0, 0.0, 0.0823, 0.0, -lim, lim}};
}

std::vector<DhJoint> iiwa_chain() {
  const double h = kPi / 2;
  const auto deg = [](double d) { return d * kPi / 180.0; };
  return {{0.0, -h, 0.34, 0.0, -deg(170), deg(170)}, {0.0, h, 0.0, 0.0, -deg(120), deg(120)},
          {0.0, h, 0.4, 0.0, -deg(170), deg(170)},   {0.0, -h, 0.0, 0.0, -deg(120), deg(120)},
          {0.0, -h, 0.4, 0.0, -deg(170), deg(170)},  {0.0, h, 0.0, 0.0, -deg(120), deg(120)},
          {0.0, 0.0, 0.126, 0.0, -deg(175), deg(175)}};
}

// Base-frame rotation of a camera looking straight down with image x along base x.
Mat3 look_down() {
  Mat3 r;
  r.col(0) = Vec3(1, 0, 0);
  r.col(1) = Vec3(0, -1, 0);
  r.col(2) = Vec3(0, 0, -1);
  return r;
}

SynthConfig common_config(std::uint64_t seed, const std::string& material, double duration,
                          std::vector<DhJoint> joints, std::vector<double> home) {
  SynthConfig c;
  c.seed = seed;
  c.duration = duration;
  c.tags = {material, "single", "center"};
  c.chain = std::move(joints);
  c.home_joints = std::move(home);
  const Pose start = forward(KinematicChain(c.chain, c.chain_base), c.home_joints);
  c.tool_orientation = start.orientation;
  const double surface = start.position.z() - 0.01;
  c.contact = material_contact(material, "single", surface);
  c.control_points = plan_palpation(seed, start.position, surface, duration, c.knot_spacing);
  c.haptic_anchor = start.position;
  return c;
}

}  // namespace

SynthConfig dataset_a_config(std::uint64_t seed, const std::string& material, double duration) {
  SynthConfig c = common_config(seed, material, duration, ur5_chain(),
                                {0.0, -kPi / 2, kPi / 2, -kPi / 2, -kPi / 2, 0.0});
  const Vec3 center = c.haptic_anchor;
  c.camera.extrinsic = RigidTransform(look_down(), center + Vec3(0.0, 0.0, 0.45));
  c.calibration.attenuation = 1.0;
  c.calibration.gravity_comp = Vec3(0.0, 0.0, -1.5);
  c.calibration.tool_bias = Vec3(0.12, -0.08, 0.3);
  c.haptic_joint_count = 6;
  c.background_tint = material == "soft" ? Vec3(0.80, 0.45, 0.45) : Vec3(0.85, 0.62, 0.55);
  c.texture_seed = derive_seed(seed, 11);
  return c;
}

SynthConfig dataset_b_config(std::uint64_t seed, const std::string& material, double duration) {
  SynthConfig c = common_config(seed, material, duration, iiwa_chain(), {0.0, 0.6, 0.0, -1.5, 0.0, 1.0, 0.0});
  const Vec3 center = c.haptic_anchor;
  const Mat3 rot = Eigen::AngleAxisd(25.0 * kPi / 180.0, Vec3::UnitZ()).toRotationMatrix() *
                   Eigen::AngleAxisd(8.0 * kPi / 180.0, Vec3::UnitX()).toRotationMatrix() * look_down();
  // Aim the optical axis at the starting tool position from 0.5 m away.
  c.camera.extrinsic = RigidTransform(rot, center - 0.5 * rot.col(2));
  c.calibration.attenuation = 0.9;
  c.calibration.gravity_comp = Vec3(0.05, 0.0, -2.2);
  c.calibration.tool_bias = Vec3(-0.1, 0.15, 0.05);
  c.haptic_joint_count = 7;
  c.with_wrench = true;
  c.with_gripper = true;
  c.background_tint = material == "soft" ? Vec3(0.70, 0.50, 0.48) : Vec3(0.66, 0.58, 0.52);
  c.texture_seed = derive_seed(seed, 12);
  return c;
}

std::array<SynthDataset, 2> make_benchmark_suite(std::uint64_t seed, const SuiteOptions& options) {
  if (options.clips_per_material < 1) throw ConfigError("clips_per_material must be at least 1");
  std::array<SynthDataset, 2> suite;
  const std::array<std::string, 2> materials = {"soft", "stiff"};
  for (int d = 0; d < 2; ++d) {
    SynthDataset& ds = suite[d];
    DatasetManifest& m = ds.manifest;
    m.name = d == 0 ? "A" : "B";
    m.metadata["generator"] = "forcecast synth";
    m.metadata["seed"] = std::to_string(seed);
    std::size_t index = 0;
    for (const std::string& material : materials) {
      for (int k = 0; k < options.clips_per_material; ++k, ++index) {
        const std::string structure = k % 2 == 0 ? "single" : "double";
        const std::uint64_t clip_seed = derive_seed(seed, static_cast<std::uint64_t>(d), index);
        SynthConfig cfg = d == 0 ? dataset_a_config(clip_seed, material, options.clip_duration)
                                 : dataset_b_config(clip_seed, material, options.clip_duration);
        cfg.contact = material_contact(material, structure, cfg.contact.surface_height);
        cfg.tags = {material, structure, "center"};
        cfg.tool_mass = options.tool_mass;
        cfg.noise_sigma = options.noise_sigma;
        char name[32];
        std::snprintf(name, sizeof name, "clip_%03zu", index);
        cfg.name = name;
        if (index == 0) {
          m.video_rate_hz = cfg.video_rate_hz;
          m.state_rate_hz = cfg.state_rate_hz;
          m.chain = cfg.chain;
          m.chain_base = cfg.chain_base;
          m.calibration = cfg.calibration;
          m.camera = cfg.camera;
          m.image_zoom = d == 0 ? 1.0 : 1.1;
        } else {
          // Dataset-level settings are shared by all clips.
          cfg.camera = m.camera;
          cfg.calibration = m.calibration;
        }
        ds.clips.push_back(generate_clip(cfg));
        m.clips.push_back({name, cfg.tags});
      }
    }
    m.validate();
  }
  return suite;
}

void write_dataset(const SynthDataset& dataset, const std::filesystem::path& dir, unsigned workers) {
  std::filesystem::create_directories(dir);
  const std::size_t n = dataset.clips.size();
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const SynthClip& c = dataset.clips[i];
        save_clip(dir / dataset.manifest.clips.at(i).path, c.states, c.raw_forces, c.frame_times.size(), c.render);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  save_manifest(dataset.manifest, dir / "manifest.json");
}

}  // namespace forcecast
