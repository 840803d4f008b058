#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "forcecast/dataset.hpp"
#include "forcecast/errors.hpp"
#include "fixtures.hpp"

namespace forcecast {
namespace {

using testing::frame_grid;
using testing::plain_manifest;
using testing::short_suite;
using testing::timed_clip;

// ---- velocities ----

std::vector<TimedPose> poses_at(int n, double rate, const std::function<TimedPose(double)>& f) {
  std::vector<TimedPose> out;
  for (int i = 0; i < n; ++i) out.push_back(f(i / rate));
  return out;
}

TEST(ComputeVelocities, ConstantPoseIsZero) {
  const auto poses = poses_at(20, 200, [](double t) {
    return TimedPose{t, Vec3(0.1, 0.2, 0.3), Quaternion::from_axis_angle(Vec3::UnitX(), 0.4)};
  });
  for (const Twist& tw : compute_velocities(poses)) {
    EXPECT_EQ(tw.linear, Vec3::Zero());
    EXPECT_LT(tw.angular.norm(), 1e-12);
  }
}

TEST(ComputeVelocities, LinearMotion) {
  const auto poses = poses_at(50, 200, [](double t) { return TimedPose{t, Vec3(t, 0, 0), Quaternion::identity()}; });
  for (const Twist& tw : compute_velocities(poses)) EXPECT_LT((tw.linear - Vec3(1, 0, 0)).norm(), 1e-9);
}

TEST(ComputeVelocities, ConstantSpinAboutZ) {
  const auto poses = poses_at(400, 200, [](double t) {
    return TimedPose{t, Vec3::Zero(), Quaternion::from_axis_angle(Vec3::UnitZ(), t)};
  });
  const auto tw = compute_velocities(poses);
  ASSERT_EQ(tw.size(), poses.size());
  for (const Twist& w : tw) EXPECT_LT((w.angular - Vec3(0, 0, 1)).norm(), 1e-6);
}

TEST(ComputeVelocities, FirstSampleCopiesSecond) {
  const auto poses = poses_at(5, 10, [](double t) { return TimedPose{t, Vec3(t * t, 0, 0), Quaternion::identity()}; });
  const auto tw = compute_velocities(poses);
  EXPECT_EQ(tw[0].linear, tw[1].linear);
  EXPECT_NEAR(tw[2].linear.x(), (0.04 - 0.01) / 0.1, 1e-12);
}

TEST(ComputeVelocities, RejectsBadTimestamps) {
  std::vector<TimedPose> one = {{0.0, Vec3::Zero(), Quaternion::identity()}};
  EXPECT_THROW(compute_velocities(one), DataError);
  std::vector<TimedPose> dup = {{0.0, Vec3::Zero(), Quaternion::identity()}, {0.0, Vec3::Zero(), Quaternion::identity()}};
  EXPECT_THROW(compute_velocities(dup), DataError);
}

// ---- state layout and generalization ----

TEST(StateLayout, CanonicalRangesTileTheVector) {
  std::vector<int> hits(kStateSize, 0);
  for (const auto& [field, range] : canonical_layout()) {
    for (std::size_t s = range.begin; s < range.end; ++s) ++hits[s];
  }
  for (std::size_t s = 0; s < kStateSize; ++s) EXPECT_EQ(hits[s], 1) << s;
  EXPECT_EQ(canonical_range(StateField::kRobotJoints), (SlotRange{13, 20}));
  EXPECT_EQ(canonical_range(StateField::kWrench), (SlotRange{47, 53}));
  EXPECT_EQ(canonical_range(StateField::kGripper), (SlotRange{53, 54}));
}

TEST(StateLayout, FieldNamesRoundTrip) {
  for (const StateField f : kAllStateFields) EXPECT_EQ(parse_field(field_name(f)), f);
  EXPECT_FALSE(parse_field("nope").has_value());
}

TEST(StateLayout, OverlapAndOverflowRejected) {
  StateLayout l = canonical_layout();
  l[StateField::kGripper] = {52, 53};
  EXPECT_THROW(validate_layout(l), ConfigError);
  l[StateField::kGripper] = {53, 55};
  EXPECT_THROW(validate_layout(l), ConfigError);
}

RawState dafoes_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  RawState s;
  s.ee_position = {u(rng), u(rng), u(rng)};
  s.ee_orientation = Quaternion::normalized(u(rng), u(rng), u(rng), u(rng));
  for (int i = 0; i < 6; ++i) s.robot_joints.push_back(u(rng));
  s.haptic_position = {u(rng), u(rng), u(rng)};
  s.haptic_orientation = Quaternion::normalized(u(rng), u(rng), u(rng), u(rng));
  for (int i = 0; i < 6; ++i) s.haptic_joints.push_back(u(rng));
  return s;
}

TEST(GeneralizeState, TwentySixElementSourceLeavesSensorSlotsZero) {
  std::mt19937_64 rng(31);
  const RawState s = dafoes_state(rng);
  EXPECT_EQ(s.element_count(), 26u);
  StateDerivatives d;
  d.ee_linear = {1, 2, 3};
  d.robot_joint_rates = std::vector<double>(6, 0.5);
  const GeneralizedState g = generalize_state(s, d, canonical_layout());
  for (std::size_t i = 47; i < 54; ++i) EXPECT_EQ(g[i], 0.0) << i;
  EXPECT_EQ(g[19], 0.0);  // 7th robot joint
  EXPECT_EQ(g[26], 0.0);
  EXPECT_EQ(g[46], 0.0);
}

TEST(GeneralizeState, ZeroStateKeepsIdentityOrientation) {
  const GeneralizedState g = generalize_state(RawState{}, StateDerivatives{}, canonical_layout());
  for (std::size_t i = 0; i < kStateSize; ++i) EXPECT_EQ(g[i], (i == 3 || i == 30) ? 1.0 : 0.0) << i;
}

// Every source value must land at exactly its mapped slot, under the canonical
// layout and under a shuffled one.
TEST(GeneralizeState, SlotBookkeeping) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    RawState s = dafoes_state(rng);
    s.robot_joints.push_back(u(rng));
    s.wrench = std::array<double, 6>{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    s.gripper = u(rng);
    StateDerivatives d;
    d.ee_linear = {u(rng), u(rng), u(rng)};
    d.ee_angular = {u(rng), u(rng), u(rng)};
    d.haptic_linear = {u(rng), u(rng), u(rng)};
    d.haptic_angular = {u(rng), u(rng), u(rng)};
    for (int i = 0; i < 7; ++i) d.robot_joint_rates.push_back(u(rng));

    // Shuffled contiguous layout.
    std::vector<StateField> order(kAllStateFields.begin(), kAllStateFields.end());
    std::shuffle(order.begin(), order.end(), rng);
    StateLayout layout;
    std::size_t at = 0;
    for (const StateField f : order) {
      const std::size_t n = canonical_range(f).size();
      layout[f] = {at, at + n};
      at += n;
    }
    for (const StateLayout& l : {canonical_layout(), layout}) {
      const GeneralizedState g = generalize_state(s, d, l);
      auto expect = [&](StateField f, const std::vector<double>& values) {
        const SlotRange r = l.at(f);
        for (std::size_t i = 0; i < r.size(); ++i) {
          EXPECT_EQ(g[r.begin + i], i < values.size() ? values[i] : 0.0) << field_name(f) << " " << i;
        }
      };
      auto v3 = [](const Vec3& v) { return std::vector<double>{v.x(), v.y(), v.z()}; };
      auto q4 = [](const Quaternion& q) { return std::vector<double>{q.w(), q.x(), q.y(), q.z()}; };
      expect(StateField::kEePosition, v3(s.ee_position));
      expect(StateField::kEeOrientation, q4(s.ee_orientation));
      expect(StateField::kEeLinearVel, v3(d.ee_linear));
      expect(StateField::kEeAngularVel, v3(d.ee_angular));
      expect(StateField::kRobotJoints, s.robot_joints);
      expect(StateField::kRobotJointVel, d.robot_joint_rates);
      expect(StateField::kHapticPosition, v3(s.haptic_position));
      expect(StateField::kHapticOrientation, q4(s.haptic_orientation));
      expect(StateField::kHapticLinearVel, v3(d.haptic_linear));
      expect(StateField::kHapticAngularVel, v3(d.haptic_angular));
      expect(StateField::kHapticJoints, s.haptic_joints);
      expect(StateField::kWrench, std::vector<double>(s.wrench->begin(), s.wrench->end()));
      expect(StateField::kGripper, {*s.gripper});
    }
  }
}

TEST(GeneralizeState, ShapeErrors) {
  RawState s;
  s.robot_joints = std::vector<double>(8, 0.0);
  EXPECT_THROW(generalize_state(s, {}, canonical_layout()), ShapeError);
  RawState w;
  w.wrench = std::array<double, 6>{};
  StateLayout l = canonical_layout();
  l.erase(StateField::kWrench);
  EXPECT_THROW(generalize_state(w, {}, l), ShapeError);
}

// ---- normalizer ----

GeneralizedState random_state(std::mt19937_64& rng, double offset) {
  std::normal_distribution<double> n(offset, 2.0);
  GeneralizedState s{};
  for (std::size_t i = 0; i < 53; ++i) s[i] = n(rng);
  return s;  // slot 53 stays 0
}

TEST(Normalizer, RepeatedStateIsDegenerate) {
  GeneralizedState s{};
  for (std::size_t i = 0; i < kStateSize; ++i) s[i] = 0.1 * static_cast<double>(i);
  const std::vector<GeneralizedState> set(10, s);
  const Normalizer n = Normalizer::fit(set);
  for (std::size_t i = 0; i < kStateSize; ++i) {
    EXPECT_EQ(n.mean[i], s[i]);
    EXPECT_EQ(n.stddev[i], 1.0);
    EXPECT_EQ(n.apply(s)[i], 0.0);
  }
}

TEST(Normalizer, MatchesBruteForceOverConcatenation) {
  std::mt19937_64 rng(33);
  std::vector<GeneralizedState> a, b, all;
  for (int i = 0; i < 300; ++i) a.push_back(random_state(rng, 1.0));
  for (int i = 0; i < 500; ++i) b.push_back(random_state(rng, -3.0));
  all = a;
  all.insert(all.end(), b.begin(), b.end());
  const Normalizer n = Normalizer::fit(all);
  for (std::size_t slot = 0; slot < kStateSize; ++slot) {
    long double sum = 0, sq = 0;
    for (const auto& s : all) sum += s[slot];
    const long double mean = sum / all.size();
    for (const auto& s : all) sq += (s[slot] - mean) * (s[slot] - mean);
    const double sd = std::sqrt(static_cast<double>(sq / all.size()));
    EXPECT_NEAR(n.mean[slot], static_cast<double>(mean), 1e-9);
    EXPECT_NEAR(n.stddev[slot], slot == 53 ? 1.0 : sd, 1e-9);
  }
  EXPECT_EQ(n.stddev[53], 1.0);

  // Applying to the fit set gives zero mean and unit spread.
  for (std::size_t slot = 0; slot < 53; ++slot) {
    double m = 0, v = 0;
    for (const auto& s : all) m += n.apply(s)[slot];
    m /= all.size();
    for (const auto& s : all) v += std::pow(n.apply(s)[slot] - m, 2);
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(v / all.size()), 1.0, 1e-9);
  }
}

TEST(Normalizer, EmptySetAndJsonRoundTrip) {
  EXPECT_THROW(Normalizer::fit(std::vector<GeneralizedState>{}), DataError);
  std::mt19937_64 rng(34);
  std::vector<GeneralizedState> set;
  for (int i = 0; i < 20; ++i) set.push_back(random_state(rng, 0.0));
  const Normalizer n = Normalizer::fit(set);
  EXPECT_EQ(Normalizer::from_json(n.to_json()), n);
}

// ---- images ----

TEST(PreprocessImage, UniformGray) {
  Image img(320, 300);
  std::fill(img.rgb.begin(), img.rgb.end(), 128);
  const ImageF out = preprocess_image(img, 1.0);
  ASSERT_EQ(out.width, 256);
  ASSERT_EQ(out.height, 256);
  ASSERT_EQ(out.channels, 3);
  for (int c = 0; c < 3; ++c) {
    const float expected = (128.0f / 255.0f - kImagenetMean[c]) / kImagenetStd[c];
    for (int y = 0; y < 256; y += 17) {
      for (int x = 0; x < 256; x += 13) EXPECT_NEAR(out.at(c, y, x), expected, 1e-6);
    }
  }
}

// Half-pixel-center bilinear resize of a 300x300 image written out independently.
double bilinear_oracle(const Image& img, int c, int ox, int oy) {
  const double scale = 300.0 / 256.0;
  const double sx = std::clamp((ox + 0.5) * scale - 0.5, 0.0, 299.0);
  const double sy = std::clamp((oy + 0.5) * scale - 0.5, 0.0, 299.0);
  const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, 299), y1 = std::min(y0 + 1, 299);
  const double fx = sx - x0, fy = sy - y0;
  auto p = [&](int x, int y) { return img.at(x, y, c) / 255.0; };
  return (1 - fy) * ((1 - fx) * p(x0, y0) + fx * p(x1, y0)) + fy * ((1 - fx) * p(x0, y1) + fx * p(x1, y1));
}

TEST(CropZoomResize, MatchesBilinearOracleAtZoomOne) {
  std::mt19937_64 rng(35);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(300, 300);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(u(rng));
  const ImageF out = crop_zoom_resize(img, 1.0);
  for (const auto& [x, y] : {std::pair{0, 0}, {255, 0}, {0, 255}, {255, 255}, {100, 37}, {128, 128}}) {
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(c, y, x), bilinear_oracle(img, c, x, y), 1e-6) << x << "," << y;
  }
}

TEST(CropZoomResize, ZoomKeepsCenteredMarkerAndDropsBorder) {
  Image img(400, 360);
  for (int y = 0; y < 360; ++y) {
    for (int x = 0; x < 400; ++x) {
      const bool border = std::abs(x - 200) > 120 || std::abs(y - 180) > 120;
      const bool marker = std::abs(x - 199.5) < 10 && std::abs(y - 179.5) < 10;
      img.at(x, y, 0) = border ? 255 : (marker ? 200 : 0);
    }
  }
  const ImageF one = crop_zoom_resize(img, 1.0);
  const ImageF zoomed = crop_zoom_resize(img, 1.5);
  EXPECT_GT(one.at(0, 0, 0), 0.9f);  // border visible before zooming
  float max_edge = 0;
  for (int i = 0; i < 256; ++i) {
    max_edge = std::max({max_edge, zoomed.at(0, 0, i), zoomed.at(0, 255, i), zoomed.at(0, i, 0), zoomed.at(0, i, 255)});
  }
  EXPECT_EQ(max_edge, 0.0f);
  // Marker centroid stays at the image center.
  double sx = 0, sy = 0, sw = 0;
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) {
      const double w = zoomed.at(0, y, x);
      sx += w * x, sy += w * y, sw += w;
    }
  }
  EXPECT_NEAR(sx / sw, 127.5, 0.5);
  EXPECT_NEAR(sy / sw, 127.5, 0.5);
}

TEST(CropZoomResize, UndersizedAndDeterministic) {
  EXPECT_THROW(crop_zoom_resize(Image(299, 400), 1.0), DataError);
  Image img(320, 320);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  EXPECT_EQ(preprocess_image(img, 1.1), preprocess_image(img, 1.1));
}

// ---- manifests ----

const char* kMinimalManifest = R"({
  "name": "mini", "video_rate_hz": 30, "state_rate_hz": 200,
  "chain": {"joints": [{"d": 0.1}, {"a": 0.2}, {"a": 0.2}, {"d": 0.1}, {"d": 0.1}, {"d": 0.05}]},
  "clips": [{"path": "c0"}]
})";

TEST(Manifest, MinimalGetsDefaults) {
  const DatasetManifest m = manifest_from_json(kMinimalManifest);
  EXPECT_EQ(m.image_zoom, 1.0);
  EXPECT_EQ(m.calibration.attenuation, 1.0);
  EXPECT_EQ(m.layout, canonical_layout());
  EXPECT_EQ(m.chain.size(), 6u);
}

TEST(Manifest, OverlappingLayoutRejected) {
  std::string text = kMinimalManifest;
  text.insert(text.find("\"clips\""), R"("layout": {"p_E": [3, 6], "o_E": [5, 9]}, )");
  EXPECT_THROW(manifest_from_json(text), ConfigError);
}

TEST(Manifest, MalformedAndInvalid) {
  EXPECT_THROW(manifest_from_json("{not json"), DataError);
  std::string text = kMinimalManifest;
  text.replace(text.find("\"state_rate_hz\": 200"), 20, "\"state_rate_hz\": 10");
  EXPECT_THROW(manifest_from_json(text), ConfigError);
}

TEST(Manifest, GeneratorManifestRoundTripsByteIdentically) {
  const auto suite = make_benchmark_suite(3, {4.0, 1, 0.5, 0.0});
  for (const auto& ds : suite) {
    const std::string text = manifest_to_json(ds.manifest);
    const DatasetManifest back = manifest_from_json(text);
    EXPECT_EQ(manifest_to_json(back), text);
  }
}

TEST(Manifest, MissingClipDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "forcecast_manifest_missing";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / "manifest.json", kMinimalManifest);
  EXPECT_THROW(load_manifest(dir / "manifest.json"), DataError);
  std::filesystem::create_directories(dir / "c0");
  EXPECT_NO_THROW(load_manifest(dir / "manifest.json"));
  std::filesystem::remove_all(dir);
}

// ---- windows ----

TEST(BuildWindows, ThirtyFramesGiveTwentySix) {
  const auto clip = timed_clip(plain_manifest(), frame_grid(30), 1.0);
  const auto windows = build_windows(clip);
  ASSERT_EQ(windows.size(), 26u);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (std::size_t k = 0; k < kWindowLength; ++k) {
      EXPECT_EQ(windows[w].frame_indices[k], w + k);
      EXPECT_LE(std::abs(windows[w].states[k].state.timestamp - windows[w].frame_times[k]), 1.0 / 60 + 1e-12);
      if (k) {
        EXPECT_GT(windows[w].frame_times[k], windows[w].frame_times[k - 1]);
      }
    }
    // Target is the label at the last frame's state.
    const double t = windows[w].states[4].state.timestamp;
    EXPECT_TRUE(windows[w].target.isApprox(Vec3(t, 2 * t, 3 * t)));
  }
}

TEST(BuildWindows, FiveFramesGiveOne) {
  EXPECT_EQ(build_windows(timed_clip(plain_manifest(), frame_grid(5), 0.2)).size(), 1u);
}

TEST(BuildWindows, FrameGapDropsSpanningWindows) {
  std::vector<double> times = frame_grid(10);
  for (int j = 0; j < 10; ++j) times.push_back(1.0 + 10.0 / 30 + j / 30.0);
  const auto windows = build_windows(timed_clip(plain_manifest(), times, 2.0));
  EXPECT_EQ(windows.size(), 12u);  // 6 on each side
  for (const auto& w : windows) EXPECT_LT(w.frame_times[4] - w.frame_times[0], 0.2);
}

TEST(BuildWindows, MissingStatesDropFrames) {
  // States stop at 0.5 s, frames continue to 1 s.
  const auto windows = build_windows(timed_clip(plain_manifest(), frame_grid(30), 0.5));
  for (const auto& w : windows) EXPECT_LE(w.frame_times[4], 0.5 + 1.0 / 60);
}

TEST(BuildWindows, TooFewFrames) {
  EXPECT_THROW(build_windows(timed_clip(plain_manifest(), frame_grid(4), 0.2)), DataError);
}

// ---- mixing ----

TEST(MixDatasets, RandomSplitIsDeterministicAndDisjoint) {
  const auto ds = short_suite(5);
  MixOptions o;
  o.seed = 9;
  const DataSplit a = mix_datasets(ds, o), b = mix_datasets(ds, o);
  ASSERT_EQ(a.test_clips.size(), 2u);  // one per dataset
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) EXPECT_EQ(a.train[i].clip, b.train[i].clip);
  EXPECT_EQ(epoch_order(a.train.size(), 9, 3), epoch_order(b.train.size(), 9, 3));

  std::set<const Clip*> held;
  for (const auto& c : a.test_clips) held.insert(c.get());
  for (const auto& w : a.train) EXPECT_FALSE(held.count(w.clip.get()));
  for (const auto& w : a.test) EXPECT_TRUE(held.count(w.clip.get()));
  EXPECT_EQ(a.train_clips.size() + a.test_clips.size(), ds[0].clips.size() + ds[1].clips.size());
}

TEST(MixDatasets, StiffnessIsolation) {
  const auto ds = short_suite(5);
  MixOptions o;
  o.mode = TrainingMode::kStiffness;
  const DataSplit s = mix_datasets(ds, o);
  for (const auto& w : s.train) EXPECT_EQ(w.clip->tags.material, "soft");
  for (const auto& w : s.test) EXPECT_EQ(w.clip->tags.material, "stiff");
  EXPECT_FALSE(s.test.empty());
}

TEST(MixDatasets, StructureIsolation) {
  const auto ds = short_suite(5);
  MixOptions o;
  o.mode = TrainingMode::kStructure;
  const DataSplit s = mix_datasets(ds, o);
  for (const auto& w : s.train) EXPECT_EQ(w.clip->tags.structure, "double");
  for (const auto& w : s.test) EXPECT_EQ(w.clip->tags.structure, "single");
  EXPECT_FALSE(s.train.empty());
}

TEST(MixDatasets, SingleClipCannotTrainAndTest) {
  auto m = plain_manifest();
  m->clips.push_back({"c0", {"soft", "single", "center"}});
  Dataset d{m, {timed_clip(m, frame_grid(10), 0.5)}};
  EXPECT_THROW(mix_datasets({d}, {}), ConfigError);
  EXPECT_THROW(mix_datasets({}, {}), ConfigError);
}

TEST(EpochOrder, IsAPermutationThatVariesByEpoch) {
  auto o = epoch_order(100, 1, 0);
  EXPECT_NE(o, epoch_order(100, 1, 1));
  std::sort(o.begin(), o.end());
  for (std::size_t i = 0; i < o.size(); ++i) EXPECT_EQ(o[i], i);
}

// ---- on-disk clips ----

TEST(ClipStorage, SaveLoadRoundTrip) {
  const auto suite = make_benchmark_suite(2, {3.0, 1, 0.5, 0.0});
  const auto dir = std::filesystem::temp_directory_path() / "forcecast_clip_roundtrip";
  std::filesystem::remove_all(dir);
  write_dataset(suite[1], dir);
  const DatasetManifest m = load_manifest(dir / "manifest.json");
  const Dataset loaded = load_dataset(m);
  const Dataset memory = suite[1].to_dataset();
  ASSERT_EQ(loaded.clips.size(), memory.clips.size());
  const Clip& a = *loaded.clips[0];
  const Clip& b = *memory.clips[0];
  ASSERT_EQ(a.raw_states.size(), b.raw_states.size());
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.forces.size(); i += 37) {
    EXPECT_LT((a.forces[i] - b.forces[i]).cwiseAbs().maxCoeff(), 1e-9);
    for (std::size_t s = 0; s < kStateSize; ++s) EXPECT_NEAR(a.states[i][s], b.states[i][s], 1e-9);
  }
  EXPECT_EQ(a.frames[7].source.load(), b.frames[7].source.load());
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace forcecast
