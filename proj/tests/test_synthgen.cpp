#include <gtest/gtest.h>

#include <map>

#include "eyemotion/dataset.hpp"
#include "eyemotion/synthgen.hpp"
#include "support.hpp"

using namespace eyemotion;
using eyemotion::testing::read_bytes;
using eyemotion::testing::TempDir;

namespace {

GenConfig small_config(int participants, int sessions, int frames) {
  GenConfig c;
  c.num_participants = participants;
  c.sessions = sessions;
  c.frames_per_expression = frames;
  c.enrollment_seconds = 0.0;
  c.skip_fraction = 0.0;
  c.label_set = LabelSetKind::emo5;
  c.seed = 7;
  return c;
}

std::vector<double> flat(const EyePairImage& img) { return {img.pixels.pixels.begin(), img.pixels.pixels.end()}; }

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

// Nearest-centroid accuracy: centroids from `train`, evaluated on `test`.
double centroid_accuracy(const std::vector<const Frame*>& train, const std::vector<const Frame*>& test, std::size_t C) {
  std::vector<std::vector<double>> centroid(C);
  std::vector<int> count(C, 0);
  for (const auto* f : train) {
    const auto v = flat(f->image);
    if (centroid[f->label].empty()) centroid[f->label].assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) centroid[f->label][i] += v[i];
    ++count[f->label];
  }
  for (std::size_t c = 0; c < C; ++c)
    for (auto& x : centroid[c]) x /= count[c];
  int correct = 0;
  for (const auto* f : test) {
    const auto v = flat(f->image);
    std::size_t best = 0;
    for (std::size_t c = 1; c < C; ++c)
      if (sq_dist(v, centroid[c]) < sq_dist(v, centroid[best])) best = c;
    correct += best == f->label;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST(Synthgen, SameArgumentsGiveIdenticalImages) {
  const auto p = make_participant(3, 1);
  const auto s = make_session(3, 1, 0);
  const auto labels = LabelSet::au10();
  const auto a = render_frame(p, s, labels, 4, {0.2, -0.3}, 17, hmd_spec(1));
  const auto b = render_frame(make_participant(3, 1), make_session(3, 1, 0), labels, 4, {0.2, -0.3}, 17, hmd_spec(1));
  EXPECT_EQ(a.left, b.left);
  EXPECT_EQ(a.right, b.right);
  const auto c = render_frame(p, s, labels, 4, {0.2, -0.3}, 18, hmd_spec(1));
  EXPECT_NE(a.left, c.left);
}

TEST(Synthgen, HeadsetResolutions) {
  const auto labels = LabelSet::emo5();
  const auto p = make_participant(1, 0);
  const auto s = make_session(1, 0, 0);
  const auto one = render_frame(p, s, labels, 0, {}, 0, hmd_spec(1));
  EXPECT_EQ(one.left.height, 200u);
  EXPECT_EQ(one.left.width, 200u);
  const auto two = render_frame(p, s, labels, 0, {}, 0, hmd_spec(2));
  EXPECT_EQ(two.right.height, 240u);
  EXPECT_EQ(two.right.width, 320u);
  EXPECT_THROW(hmd_spec(3), InputError);
}

TEST(Synthgen, RejectsBadLabelAndGaze) {
  const auto labels = LabelSet::emo5();
  const auto p = make_participant(1, 0);
  const auto s = make_session(1, 0, 0);
  EXPECT_THROW(render_frame(p, s, labels, 5, {}, 0, hmd_spec(1)), InputError);
  EXPECT_THROW(render_frame(p, s, labels, 0, {1.5, 0.0}, 0, hmd_spec(1)), InputError);
}

TEST(Synthgen, ParticipantParametersStayInRange) {
  for (int pid = 0; pid < 30; ++pid) {
    const auto p = make_participant(11, pid);
    EXPECT_GE(p.iris_radius, 0.15);
    EXPECT_LE(p.iris_radius, 0.30);
    EXPECT_GE(p.skin, 0.0);
    EXPECT_LE(p.skin, 1.0);
    const auto s = make_session(11, pid, 1);
    EXPECT_LE(std::abs(s.rotation_deg), 4.0);
    EXPECT_LE(std::abs(s.offset_x), 0.08);
  }
  EXPECT_NE(make_participant(11, 0).skin, make_participant(11, 1).skin);
}

TEST(Synthgen, ClosedEyesAreDarkerInsideTheOpening) {
  const auto labels = LabelSet::au10();
  const auto hmd = hmd_spec(1);
  for (int pid = 0; pid < 6; ++pid) {
    const auto p = make_participant(5, pid);
    for (int sid = 0; sid < 2; ++sid) {
      const auto s = make_session(5, pid, sid);
      const auto mask = aperture_mask(p, s, hmd);
      const auto open = render_frame(p, s, labels, labels.neutral(), {}, 0, hmd);
      const auto closed = render_frame(p, s, labels, labels.closed(), {}, 0, hmd);
      EXPECT_GE(aperture_mean(open.left, mask) - aperture_mean(closed.left, mask), kClosedApertureMargin)
          << "participant " << pid << " session " << sid;
      EXPECT_GE(aperture_mean(open.right, mask) - aperture_mean(closed.right, mask), kClosedApertureMargin)
          << "participant " << pid << " session " << sid;
    }
  }
}

TEST(Synthgen, WinkClosesOnlyOneEye) {
  const auto labels = LabelSet::au10();
  const auto hmd = hmd_spec(1);
  const auto p = make_participant(2, 4);
  const auto s = make_session(2, 4, 1);
  const Gaze g{0.1, 0.4};
  const auto neutral = render_frame(p, s, labels, labels.neutral(), g, 9, hmd);
  const auto closed = render_frame(p, s, labels, labels.closed(), g, 9, hmd);
  const auto left_wink = render_frame(p, s, labels, labels.index("LeftWink"), g, 9, hmd);
  const auto right_wink = render_frame(p, s, labels, labels.index("RightWink"), g, 9, hmd);
  EXPECT_EQ(left_wink.left, closed.left);
  EXPECT_EQ(left_wink.right, neutral.right);
  EXPECT_EQ(right_wink.right, closed.right);
  EXPECT_EQ(right_wink.left, neutral.left);
}

TEST(Synthgen, PlanCountsEveryClassAndFrame) {
  const auto plan = plan_dataset(small_config(2, 2, 10));
  EXPECT_EQ(plan.size(), 200u);
  std::map<std::string, int> per_label;
  for (const auto& s : plan) ++per_label[s.label];
  EXPECT_EQ(per_label.size(), 5u);
  for (const auto& [label, n] : per_label) EXPECT_EQ(n, 40) << label;
}

TEST(Synthgen, DefaultPlanHasAboutTwoThousandFramesPerParticipant) {
  GenConfig c;
  const auto plan = plan_dataset(c);
  EXPECT_NEAR(static_cast<double>(plan.size()), 23.0 * 2000.0, 0.05 * 23.0 * 2000.0);
  std::map<int, int> per_participant;
  for (const auto& s : plan) ++per_participant[s.participant_id];
  EXPECT_EQ(per_participant.size(), 23u);
  for (const auto& [pid, n] : per_participant) EXPECT_GE(n, 1800) << pid;
}

TEST(Synthgen, SkippedBrowClassIsSkippedInEverySession) {
  GenConfig c;
  c.num_participants = 4;
  c.frames_per_expression = 2;
  c.skip_fraction = 1.0;
  const auto plan = plan_dataset(c);
  for (int pid = 0; pid < 4; ++pid) {
    std::set<std::string> s0, s1;
    for (const auto& s : plan)
      if (s.participant_id == pid) (s.session_id == 0 ? s0 : s1).insert(s.label);
    EXPECT_EQ(s0.size(), 9u);
    EXPECT_EQ(s0, s1);
  }
}

TEST(Synthgen, EnrollmentNeutralClipComesFirst) {
  auto c = small_config(1, 1, 3);
  c.enrollment_seconds = 5.0;
  const auto plan = plan_dataset(c);
  ASSERT_EQ(plan.size(), 50u + 15u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(plan[i].label, "Neutral");
  for (std::size_t i = 0; i < plan.size(); ++i) EXPECT_EQ(plan[i].frame_index, static_cast<int>(i));
}

TEST(Synthgen, GenerateWritesManifestAndImagesDeterministically) {
  TempDir a("gen_a"), b("gen_b");
  const auto c = small_config(1, 2, 2);
  const auto samples = generate_dataset(c, a.path());
  generate_dataset(c, b.path());
  EXPECT_EQ(read_bytes(a / "manifest.jsonl"), read_bytes(b / "manifest.jsonl"));
  for (const auto& s : samples) {
    EXPECT_EQ(read_bytes(a.path() / s.left_path), read_bytes(b.path() / s.left_path));
    EXPECT_EQ(read_bytes(a.path() / s.right_path), read_bytes(b.path() / s.right_path));
  }
  const auto m = read_manifest(a.path());
  EXPECT_EQ(m.samples, samples);
  const auto first = nlohmann::json::parse(read_bytes(a / "manifest.jsonl").substr(0, read_bytes(a / "manifest.jsonl").find('\n')));
  for (const char* key : {"participant_id", "session_id", "hmd_id", "label", "left_path", "right_path", "frame_index",
                          "blink_flag"})
    EXPECT_TRUE(first.contains(key)) << key;
  const auto img = read_pgm(a.path() / samples[3].left_path);
  EXPECT_EQ(img, render_sample(c, samples[3]).left);
}

TEST(Synthgen, FailedGenerationRemovesPartialOutput) {
  TempDir dir("gen_fail");
  const auto c = small_config(1, 1, 2);
  const auto plan = plan_dataset(c);
  std::filesystem::create_directories(dir.path() / plan[3].left_path);  // a directory where an image must go
  EXPECT_THROW(generate_dataset(c, dir.path()), IoError);
  EXPECT_FALSE(std::filesystem::exists(dir / "manifest.jsonl"));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / plan[0].left_path));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / plan[2].right_path));
}

TEST(Blinks, ZeroRateLeavesManifestUnchanged) {
  auto plan = plan_dataset(small_config(2, 2, 10));
  const auto before = plan;
  inject_blinks(plan, LabelSet::emo5(), 0.0, 1);
  EXPECT_EQ(plan, before);
}

TEST(Blinks, FlagsExactFractionOfEachOpenClass) {
  auto c = small_config(1, 1, 100);
  auto plan = plan_dataset(c);
  const auto labels = LabelSet::emo5();
  inject_blinks(plan, labels, 0.1, 3);
  std::map<std::string, int> flagged;
  for (const auto& s : plan)
    if (s.blink_flag) ++flagged[s.label];
  EXPECT_EQ(flagged.count("ClosedEyes"), 0u);
  for (const auto& name : labels.classes()) {
    if (name != "ClosedEyes") {
      EXPECT_EQ(flagged[name], 10) << name;
    }
  }
}

TEST(Blinks, EnrollmentFramesAreNeverFlagged) {
  auto c = small_config(1, 1, 100);
  c.enrollment_seconds = 5.0;
  auto plan = plan_dataset(c);
  inject_blinks(plan, LabelSet::emo5(), 0.2, 3, c.enrollment_frames());
  for (int i = 0; i < 50; ++i) EXPECT_FALSE(plan[i].blink_flag);
  int neutral_flagged = 0;
  for (const auto& s : plan) neutral_flagged += s.label == "Neutral" && s.blink_flag;
  EXPECT_EQ(neutral_flagged, 20);
}

TEST(Blinks, RateOutsideRangeIsRejected) {
  auto plan = plan_dataset(small_config(1, 1, 5));
  EXPECT_THROW(inject_blinks(plan, LabelSet::emo5(), 0.25, 1), InputError);
  EXPECT_THROW(inject_blinks(plan, LabelSet::emo5(), -0.1, 1), InputError);
}

TEST(Blinks, FlaggedFramesLookClosed) {
  auto c = small_config(1, 1, 20);
  auto plan = plan_dataset(c);
  inject_blinks(plan, LabelSet::emo5(), 0.2, 9);
  const auto p = make_participant(c.seed, 0);
  const auto mask = aperture_mask(p, make_session(c.seed, 0, 0), hmd_spec(1));
  double flagged = 0, clean = 0;
  int nf = 0, nc = 0;
  SampleRenderer r(c);
  for (const auto& s : plan) {
    if (s.label != "Neutral") continue;
    const double v = aperture_mean(r.render(s).left, mask);
    (s.blink_flag ? flagged : clean) += v;
    (s.blink_flag ? nf : nc) += 1;
  }
  ASSERT_EQ(nf, 4);
  EXPECT_GE(clean / nc - flagged / nf, kClosedApertureMargin);
}

TEST(Synthgen, ClassesSeparateWithinSessionBetterThanAcrossParticipants) {
  const auto set = synthesize_frames(small_config(2, 1, 20), {32, 64});
  std::vector<const Frame*> p0_even, p0_odd, p1;
  for (const auto& f : set.frames) {
    if (f.sample.participant_id == 1) p1.push_back(&f);
    else (f.sample.frame_index % 2 == 0 ? p0_even : p0_odd).push_back(&f);
  }
  const double within = centroid_accuracy(p0_even, p0_odd, 5);
  const double across = centroid_accuracy(p0_even, p1, 5);
  EXPECT_GT(within, 0.6);
  EXPECT_LT(across, within);
}

TEST(Synthgen, AppearanceFieldIsAdditive) {
  const auto p = make_participant(4, 2);
  const auto s = make_session(4, 2, 0);
  const auto pose = expression_pose(LabelSet::emo5(), 2);
  RenderOptions on, off;
  off.appearance_field = false;
  const auto a = render_frame_float(p, s, pose, {0.3, 0.1}, 5, hmd_spec(1), on);
  const auto b = render_frame_float(p, s, pose, {0.3, 0.1}, 5, hmd_spec(1), off);
  const auto a2 = render_frame_float(p, s, expression_pose(LabelSet::emo5(), 4), {-0.5, 0.2}, 6, hmd_spec(1), on);
  const auto b2 = render_frame_float(p, s, expression_pose(LabelSet::emo5(), 4), {-0.5, 0.2}, 6, hmd_spec(1), off);
  // The field adds the same per-pixel offset regardless of pose or frame.
  double max_dev = 0.0, max_field = 0.0;
  for (std::size_t i = 0; i < a.left.pixels.size(); ++i) {
    const double d1 = a.left.pixels[i] - b.left.pixels[i];
    const double d2 = a2.left.pixels[i] - b2.left.pixels[i];
    max_dev = std::max(max_dev, std::abs(d1 - d2));
    max_field = std::max(max_field, std::abs(d1));
  }
  EXPECT_LT(max_dev, 1e-6);
  EXPECT_GT(max_field, 0.01);
}
