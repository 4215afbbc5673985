// Acceptance suite: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria by number; no arguments runs all of them.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eyemotion/blink.hpp"
#include "eyemotion/checkpoint.hpp"
#include "eyemotion/evaluation.hpp"
#include "eyemotion/grad_check.hpp"
#include "eyemotion/runtime.hpp"
#include "eyemotion/synthgen.hpp"
#include "support.hpp"

using namespace eyemotion;
using eyemotion::testing::read_bytes;
using eyemotion::testing::TempDir;
using eyemotion::testing::write_bytes;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

// Collects the checks of one criterion and prints a single verdict line.
class Criterion {
 public:
  Criterion(int number, std::string title) : number_(number), title_(std::move(title)) {}

  void check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
    std::cerr << "  [" << (ok ? "ok" : "FAILED") << "] " << what << '\n';
  }

  void note(const std::string& what) { std::cerr << "  " << what << '\n'; }

  bool finish() const {
    std::cout << (failures_.empty() ? "PASS" : "FAIL") << " criterion " << number_ << ": " << title_;
    if (!failures_.empty()) std::cout << " (" << failures_.size() << " check(s) failed; first: " << failures_[0] << ")";
    std::cout << std::endl;
    return failures_.empty();
  }

 private:
  int number_;
  std::string title_;
  std::vector<std::string> failures_;
};

std::string fmt(const char* format, double a) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a);
  return buf;
}

std::string fmt(const char* format, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

// ---------------------------------------------------------------------------

bool criterion_1() {
  Criterion c(1, "gradient check of a compact CNN against central differences");
  Network<double> net({1, 16, 16}, {LayerSpec::conv(1, 4, 3, 1), LayerSpec::relu(), LayerSpec::maxpool(),
                                    LayerSpec::conv(4, 8, 3, 1), LayerSpec::relu(), LayerSpec::maxpool(),
                                    LayerSpec::flatten(), LayerSpec::dense(128, 16), LayerSpec::relu(),
                                    LayerSpec::dense(16, 5), LayerSpec::softmax()});
  initialize_parameters(net, 17);
  Rng rng(18);
  for (std::size_t t = 1; t < net.parameters().size(); t += 2)
    for (auto& v : net.parameters()[t].values()) v = rng.uniform(-0.1, 0.1);
  std::vector<Tensor<double>> inputs;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 4; ++i) {
    inputs.push_back(eyemotion::testing::random_tensor<double>({1, 16, 16}, 200 + i, 0.0, 1.0));
    labels.push_back(i % 5);
  }
  c.check(net.parameter_count() <= 5000, "parameters " + std::to_string(net.parameter_count()) + " <= 5000");
  const auto start = Clock::now();
  const auto report = grad_check(net, ClassificationObjective(inputs, labels, 0.0004), {1e-3, 1e-4, 150, 19});
  const double elapsed = seconds_since(start);
  c.check(report.checked >= 100, "coordinates checked " + std::to_string(report.checked) + " >= 100");
  c.check(report.max_relative_error < 1e-4, fmt("max relative error %.3g < 1e-4", report.max_relative_error));
  c.check(elapsed < 30.0, fmt("runtime %.2f s < 30 s", elapsed));
  return c.finish();
}

bool criterion_2() {
  Criterion c(2, "loss oracles");
  auto ce = [](const Tensor<double>& p, std::vector<std::size_t> y, double lambda, std::span<const Tensor<double>> w) {
    return softmax_cross_entropy<double>(p, one_hot_rows<double>(y, p.dim(1)), w, {p.dim(1), lambda});
  };
  for (std::size_t C : {2u, 5u, 10u}) {
    Tensor<double> uniform(Shape{3, C}, 1.0 / static_cast<double>(C));
    const double loss = ce(uniform, {0, 1, C - 1}, 0.0, {}).loss;
    c.check(std::abs(loss - std::log(static_cast<double>(C))) < 1e-9,
            "uniform loss = ln " + std::to_string(C) + fmt(" (error %.2g)", std::abs(loss - std::log(double(C)))));
  }
  Tensor<double> certain(Shape{2, 5});
  certain.at(0, 3) = 1.0;
  certain.at(1, 0) = 1.0;
  const double zero = ce(certain, {3, 0}, 0.0, {}).loss;
  c.check(std::abs(zero) < 1e-9, fmt("one-hot-correct loss %.3g within 1e-9 of 0", zero));
  Tensor<double> p(Shape{2, 5}, std::vector<double>{0.1, 0.2, 0.3, 0.2, 0.2, 0.6, 0.1, 0.1, 0.1, 0.1});
  const std::vector<Tensor<double>> w{eyemotion::testing::random_tensor<double>({4, 6}, 3),
                                      eyemotion::testing::random_tensor<double>({9}, 4)};
  double sq = 0.0;
  for (const auto& t : w)
    for (auto v : t.values()) sq += v * v;
  const double base = ce(p, {2, 0}, 0.0, w).loss;
  double worst = 0.0;
  for (double lambda : {0.0004, 0.01, 0.5}) {
    const double got = ce(p, {2, 0}, lambda, w).loss - base;
    worst = std::max(worst, std::abs(got - lambda * sq / 2.0));
  }
  c.check(worst < 1e-9, fmt("L2 term linear in lambda (max deviation %.2g)", worst));
  return c.finish();
}

bool criterion_3() {
  Criterion c(3, "scalar RMSProp step against the hand recurrence");
  std::vector<Tensor<double>> w{Tensor<double>(Shape{1}, 1.0)};
  std::vector<Tensor<double>> g{Tensor<double>(Shape{1}, 0.5)};
  RmsPropState<double> state;
  rmsprop_step<double>(w, g, state, OptimizerConfig{}, 0.045);
  // ms = 0.9 * 0 + 0.1 * g^2; m = 0.9 * 0 + lr * g / sqrt(ms + eps); w -= m
  const double ms = 0.1 * 0.25;
  const double expected = 1.0 - 0.045 * 0.5 / std::sqrt(ms + 1.0);
  c.check(std::abs(w[0][0] - expected) < 1e-9, fmt("w = %.9f matches recurrence %.9f", w[0][0], expected));
  c.check(std::abs(w[0][0] - 0.977776) < 1e-6, fmt("w = %.6f ~ 0.977776", w[0][0]));
  return c.finish();
}

bool criterion_4() {
  Criterion c(4, "personalization identities");
  GenConfig g;
  g.num_participants = 2;
  g.sessions = 2;
  g.frames_per_expression = 2;
  g.label_set = LabelSetKind::emo5;
  g.seed = 21;
  const auto set = synthesize_frames(g, {64, 128});
  const auto split = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  const auto profiles = build_profiles(set.frames, split.enrollment, set.frame_rate);
  double worst_mean = 0.0;
  std::map<SessionKey, std::vector<double>> sums;
  std::map<SessionKey, int> counts;
  for (auto i : split.enrollment) {
    const auto& f = set.frames[i];
    const SessionKey key{f.sample.participant_id, f.sample.session_id};
    const auto out = personalize(f.image, profiles.at(key), nullptr);
    auto& s = sums[key];
    if (s.empty()) s.assign(out.pixels.size(), 0.0);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] += out.pixels[j];
    ++counts[key];
  }
  for (const auto& [key, s] : sums)
    for (auto v : s) worst_mean = std::max(worst_mean, std::abs(v / counts[key]));
  c.check(sums.size() == 4 && counts.begin()->second == 50, "profiles built from 50 enrollment frames each");
  c.check(worst_mean < 1e-6, fmt("personalized enrollment mean max |v| = %.2g < 1e-6", worst_mean));

  // The same frames with and without the participant's additive appearance
  // field: personalization must leave identical inputs.
  double worst_residual = 0.0;
  const auto hmd = hmd_spec(1);
  const auto labels = LabelSet::emo5();
  RenderOptions on, off;
  off.appearance_field = false;
  for (int pid = 0; pid < 3; ++pid) {
    const auto p = make_participant(31, pid);
    const auto s = make_session(31, pid, 0);
    auto render = [&](const RenderOptions& opt, std::size_t label, int frame) {
      const auto d = frame_draws(31, pid, 0, frame);
      auto pose = expression_pose(labels, label);
      const auto r = render_frame_float(p, s, pose, d.gaze, frame, hmd, opt);
      return rectify_and_concat(r.left, r.right, {64, 128}, {pid, 0, frame});
    };
    std::vector<EyePairImage> neutral_on, neutral_off;
    for (int f = 0; f < 50; ++f) {
      neutral_on.push_back(render(on, labels.neutral(), f));
      neutral_off.push_back(render(off, labels.neutral(), f));
    }
    const auto prof_on = build_profile(neutral_on, 10.0), prof_off = build_profile(neutral_off, 10.0);
    for (std::size_t label = 0; label < labels.size(); ++label) {
      const auto a = personalize(render(on, label, 60 + static_cast<int>(label)), prof_on, nullptr);
      const auto b = personalize(render(off, label, 60 + static_cast<int>(label)), prof_off, nullptr);
      for (std::size_t j = 0; j < a.pixels.size(); ++j)
        worst_residual = std::max(worst_residual, static_cast<double>(std::abs(a.pixels[j] - b.pixels[j])));
    }
  }
  c.check(worst_residual < 1e-6, fmt("additive appearance residual %.2g < 1e-6", worst_residual));
  return c.finish();
}

// ---------------------------------------------------------------------------
// Criteria 5-7 share one dataset and one set of cross-validation runs.

struct Reproduction {
  GenConfig gen;
  TrainConfig train;
  std::size_t k = 4;
  std::size_t seeds = 5;
  FrameSet set;
  std::vector<FoldPlan> plans;
  std::vector<CrossvalRun> on, off;
  double seconds = 0.0;
};

Reproduction& reproduction() {
  static Reproduction r = [] {
    Reproduction r;
    r.gen.num_participants = 12;
    r.gen.sessions = 2;
    r.gen.label_set = LabelSetKind::emo5;
    r.gen.frames_per_expression = 20;
    r.gen.seed = 1;
    r.train.input_size = {32, 64};
    r.train.epochs = 6;
    const auto start = Clock::now();
    r.set = synthesize_frames(r.gen, r.train.input_size);
    std::cerr << "  synthesized " << r.set.frames.size() << " frames in " << seconds_since(start) << " s\n";
    for (std::size_t s = 0; s < r.seeds; ++s) {
      const std::uint64_t seed = 1 + s;
      r.plans.push_back(make_folds(participants_of(r.set.frames), r.k, seed));
      auto tc = r.train;
      tc.seed = seed;
      tc.augment.seed = seed;
      r.on.push_back(crossval(r.set, tc, r.plans.back(), true));
      r.off.push_back(crossval(r.set, tc, r.plans.back(), false));
      std::cerr << "  seed " << seed << ": personalized " << r.on.back().pooled.accuracy << ", baseline "
                << r.off.back().pooled.accuracy << " (" << seconds_since(start) << " s)\n";
    }
    r.seconds = seconds_since(start);
    return r;
  }();
  return r;
}

bool criterion_5() {
  Criterion c(5, "synthetic end-to-end: personalization raises accuracy");
  auto& r = reproduction();
  std::map<int, std::size_t> per_participant;
  for (const auto& f : r.set.frames) ++per_participant[f.sample.participant_id];
  std::size_t fewest = r.set.frames.size();
  for (const auto& [pid, n] : per_participant) fewest = std::min(fewest, n);
  c.check(per_participant.size() == 12 && fewest >= 200,
          std::to_string(per_participant.size()) + " participants, >= " + std::to_string(fewest) + " frames each");

  std::vector<EvaluationReport> all_off, all_on;
  int wins = 0;
  for (std::size_t s = 0; s < r.seeds; ++s) {
    all_on.push_back(r.on[s].pooled);
    all_off.push_back(r.off[s].pooled);
    wins += r.on[s].pooled.accuracy >= r.off[s].pooled.accuracy ? 1 : 0;
    c.note(fmt("seed %.0f", double(s + 1)) + fmt(": personalized %.3f, baseline %.3f", r.on[s].pooled.accuracy,
                                                   r.off[s].pooled.accuracy));
  }
  const auto pooled_off = pool_reports(all_off), pooled_on = pool_reports(all_on);
  c.check(pooled_off.accuracy >= 0.5, fmt("(a) baseline pooled accuracy %.3f >= 0.50", pooled_off.accuracy));
  c.note(fmt("personalized pooled accuracy %.3f, macro F1 %.3f", pooled_on.accuracy, pooled_on.macro_f1));
  c.check(wins >= 4, "(b) personalized >= baseline in " + std::to_string(wins) + " of 5 seeds");
  const auto pairs = paired_samples(r.set, r.on, r.off);
  const auto t = paired_one_tailed_ttest(pairs);
  c.check(t.p < 0.05, fmt("(c) paired one-tailed t = %.3f, p = %.3g < 0.05", t.t, t.p));
  c.check(r.seconds < 15 * 60.0, fmt("runtime %.0f s < 900 s", r.seconds));
  return c.finish();
}

bool criterion_6() {
  Criterion c(6, "statistics oracles");
  const std::vector<double> fixture{1, 2, 3};
  const auto t = paired_one_tailed_ttest(fixture);
  c.check(std::abs(t.t - 3.4641) < 1e-3, fmt("fixture t = %.4f", t.t));
  c.check(std::abs(t.p - 0.0371) < 1e-3, fmt("fixture p = %.4f", t.p));

  auto& r = reproduction();
  const auto diffs = paired_samples(r.set, r.on, r.off).differences();
  const double p_t = paired_one_tailed_ttest(diffs).p;
  const double p_perm = sign_flip_permutation_p(diffs, 100000, 6);
  c.check((p_t < 0.05) == (p_perm < 0.05),
          fmt("t-test p = %.3g and permutation p = %.3g agree at 0.05", p_t, p_perm));

  RatingMatrix cohen;
  for (const auto& [a, b, n] : std::vector<std::tuple<const char*, const char*, int>>{
           {"A", "A", 3}, {"B", "B", 3}, {"A", "B", 1}, {"B", "A", 1}})
    for (int i = 0; i < n; ++i) cohen.push_back({std::string(a), std::string(b)});
  const double kappa = cohen_kappa(cohen);
  c.check(kappa == 0.5, fmt("Cohen fixture kappa = %.17g", kappa));

  Rng rng(66);
  RatingMatrix uniform;
  for (int i = 0; i < 10000; ++i) {
    std::vector<std::optional<std::string>> row;
    for (int rater = 0; rater < 4; ++rater) row.emplace_back(std::to_string(rng.below(5)));
    uniform.push_back(row);
  }
  const double fleiss = fleiss_kappa(uniform);
  c.check(std::abs(fleiss) < 0.05, fmt("independent uniform Fleiss kappa %.4f", fleiss));
  return c.finish();
}

bool criterion_7() {
  Criterion c(7, "cross-validation protocol invariants");
  auto& r = reproduction();
  const auto participants = participants_of(r.set.frames);
  bool each_once = true;
  for (const auto& plan : r.plans) {
    std::map<int, int> seen;
    for (std::size_t f = 0; f < plan.k; ++f)
      for (auto pid : plan.test_participants(f)) ++seen[pid];
    for (auto pid : participants) each_once = each_once && seen[pid] == 1;
    each_once = each_once && seen.size() == participants.size();
  }
  c.check(each_once, "every participant in exactly one test fold for every seed");

  bool tested_once = true;
  for (const auto* runs : {&r.on, &r.off})
    for (const auto& run : *runs) {
      std::map<std::size_t, int> hits;
      for (const auto& f : run.folds)
        for (const auto& p : f.predictions) ++hits[p.frame];
      for (const auto& [frame, n] : hits) tested_once = tested_once && n == 1;
    }
  c.check(tested_once, "every sample predicted exactly once per run");

  const auto enrollment = split_enrollment(r.set.frames, r.set.labels, enrollment_window(r.set.frame_rate));
  auto splits = make_splits(r.set, enrollment, r.plans[0]);
  bool clean = true;
  for (const auto& s : splits) {
    try {
      check_no_leakage(r.set, s.train, s.test_participants);
    } catch (const LeakageError&) {
      clean = false;
    }
  }
  c.check(clean, "unmodified splits pass the leakage detector");
  auto& victim = splits[1];
  std::size_t planted = victim.test.front();
  for (auto i : victim.test)
    if (r.set.frames[i].label != r.set.labels.neutral()) {
      planted = i;
      break;
    }
  victim.train.push_back(planted);
  bool caught = false;
  try {
    check_no_leakage(r.set, victim.train, victim.test_participants);
  } catch (const LeakageError& e) {
    caught = true;
    c.note(std::string("detector: ") + e.what());
  }
  c.check(caught && r.set.frames[planted].label != r.set.labels.neutral(),
          "planted non-neutral test frame in training split is detected");

  bool sums = true;
  for (const auto* runs : {&r.on, &r.off})
    for (const auto& run : *runs) {
      auto total = run.folds[0].report.confusion;
      for (std::size_t f = 1; f < run.folds.size(); ++f)
        for (std::size_t i = 0; i < total.size(); ++i)
          for (std::size_t j = 0; j < total.size(); ++j) total[i][j] += run.folds[f].report.confusion[i][j];
      sums = sums && total == run.pooled.confusion;
    }
  c.check(sums, "pooled confusion equals the sum of fold confusions");
  return c.finish();
}

// ---------------------------------------------------------------------------

bool criterion_8() {
  Criterion c(8, "blink cleanup on data with 10% injected blinks");
  GenConfig g;
  g.num_participants = 8;
  g.sessions = 2;
  g.label_set = LabelSetKind::emo5;
  g.frames_per_expression = 20;
  g.seed = 8;
  const auto set = synthesize_frames(g, {32, 64}, 0.1);
  const auto split = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  // Train on half the participants, filter the other half.
  std::vector<std::size_t> train_idx, test_idx;
  for (auto i : split.samples) (set.frames[i].sample.participant_id < 4 ? train_idx : test_idx).push_back(i);
  TrainConfig tc;
  tc.input_size = {32, 64};
  tc.epochs = 6;
  tc.seed = 8;
  const auto model = train_blink_classifier(set, train_idx, tc);
  const auto result = blink_filter(set, test_idx, model, 0.5);
  const std::set<std::size_t> removed(result.removed.begin(), result.removed.end());
  std::size_t flagged = 0, flagged_removed = 0, clean = 0, clean_removed = 0;
  for (auto i : test_idx) {
    const auto& f = set.frames[i];
    if (f.label == set.labels.closed()) continue;
    if (f.sample.blink_flag) {
      ++flagged;
      flagged_removed += removed.count(i);
    } else {
      ++clean;
      clean_removed += removed.count(i);
    }
  }
  const double recall = static_cast<double>(flagged_removed) / static_cast<double>(flagged);
  const double false_rate = static_cast<double>(clean_removed) / static_cast<double>(clean);
  c.note(std::to_string(flagged) + " flagged and " + std::to_string(clean) + " clean frames on held-out participants");
  c.check(flagged > 0, "held-out data contains flagged frames");
  c.check(recall >= 0.9, fmt("removed %.3f of flagged frames (>= 0.90)", recall));
  c.check(false_rate <= 0.05, fmt("false removals %.3f of clean frames (<= 0.05)", false_rate));
  return c.finish();
}

bool criterion_9() {
  Criterion c(9, "streaming runtime contract");
  const auto labels = LabelSet::emo5();
  Classifier model{build_model(labels, {64, 128}, 9), labels, true, {}};
  // Eye images as the headset delivers them; the loader does the full
  // rectify/resize path for every frame.
  GenConfig g;
  g.num_participants = 1;
  g.sessions = 1;
  g.frames_per_expression = 4;
  g.label_set = LabelSetKind::emo5;
  g.enrollment_seconds = 0.0;
  SampleRenderer renderer(g);
  std::vector<EyePair> eyes;
  for (const auto& s : plan_dataset(g)) eyes.push_back(renderer.render(s));
  PersonalizationProfile profile;
  profile.mean_neutral = FloatImage(64, 128, 0.4f);
  std::vector<FrameRequest> requests(200);
  for (std::size_t i = 0; i < requests.size(); ++i) requests[i].left_path = std::to_string(i % eyes.size());
  const FrameLoader load = [&](const FrameRequest& r) {
    const auto& e = eyes[std::stoul(r.left_path)];
    return rectify_and_concat(e.left, e.right, {64, 128});
  };
  std::ostringstream sink;
  const auto start = Clock::now();
  const auto summary = stream_run(model, requests, load, [&](const FrameRequest&) { return &profile; }, 0.3, sink);
  const double fps = static_cast<double>(summary.frames) / seconds_since(start);
  c.check(summary.frames == requests.size(), "all frames processed");
  c.check(fps >= 10.0, fmt("throughput %.1f fps >= 10", fps));
  c.note(fmt("latency p50 %.2f ms, p99 %.2f ms", summary.p50_ms, summary.p99_ms));

  // Oscillating fixture: the raw winner alternates between two classes.
  auto state = SmoothedState::uniform(5, 0.3);
  std::vector<std::size_t> raw, smoothed;
  Rng rng(90);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p{0.05, 0.05, 0.45, 0.4, 0.05};
    if (i % 2) std::swap(p[2], p[3]);
    const double jitter = rng.uniform(-0.02, 0.02);
    p[2] += jitter;
    p[3] -= jitter;
    smooth(state, p);
    raw.push_back(argmax(std::span<const double>(p)));
    smoothed.push_back(argmax(std::span<const double>(state.s)));
  }
  const auto flips_raw = count_transitions(raw), flips_smooth = count_transitions(smoothed);
  c.check(flips_smooth < flips_raw,
          "smoothed flips " + std::to_string(flips_smooth) + " < raw flips " + std::to_string(flips_raw));
  return c.finish();
}

bool criterion_10() {
  Criterion c(10, "determinism and file formats");
  TempDir dir("acceptance10");
  GenConfig g;
  g.num_participants = 3;
  g.sessions = 1;
  g.label_set = LabelSetKind::emo5;
  g.frames_per_expression = 4;
  g.seed = 10;
  const auto a = generate_dataset(g, dir / "a", 0.1);
  generate_dataset(g, dir / "b", 0.1);
  bool same = read_bytes(dir / "a/manifest.jsonl") == read_bytes(dir / "b/manifest.jsonl");
  for (const auto& s : a) {
    same = same && read_bytes(dir.path() / "a" / s.left_path) == read_bytes(dir.path() / "b" / s.left_path);
    same = same && read_bytes(dir.path() / "a" / s.right_path) == read_bytes(dir.path() / "b" / s.right_path);
  }
  c.check(same, "datasets byte-identical for the same seed");

  const auto set = load_frames(read_manifest(dir / "a"), LabelSet::emo5(), {16, 32}, g.frame_rate);
  TrainConfig tc;
  tc.input_size = {16, 32};
  tc.epochs = 2;
  tc.seed = 10;
  const auto plan = make_folds(participants_of(set.frames), 3, 10);
  const auto run1 = crossval(set, tc, plan, true);
  const auto run2 = crossval(set, tc, plan, true);
  bool reports = report_csv(run1.pooled) == report_csv(run2.pooled) &&
                 report_json(run1.pooled).dump() == report_json(run2.pooled).dump();
  for (std::size_t f = 0; f < plan.k; ++f) reports = reports && report_csv(run1.folds[f].report) == report_csv(run2.folds[f].report);
  c.check(reports, "reports byte-identical for the same seed");

  const auto split = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  const auto profiles = build_profiles(set.frames, split.enrollment, set.frame_rate);
  const auto examples = make_examples(set, split.samples, &profiles);
  const auto m1 = train(examples, set.labels, tc).model;
  const auto m2 = train(examples, set.labels, tc).model;
  save_checkpoint(m1, dir / "m1.eyem");
  save_checkpoint(m2, dir / "m2.eyem");
  const auto bytes = read_bytes(dir / "m1.eyem");
  c.check(bytes == read_bytes(dir / "m2.eyem"), "checkpoints byte-identical for the same seed");
  const auto back = load_checkpoint(dir / "m1.eyem");
  c.check(back.net.parameters() == m1.net.parameters() && back.net.layers() == m1.net.layers() &&
              back.labels.classes() == m1.labels.classes() && back.personalized == m1.personalized,
          "checkpoint round-trip is bit-exact");
  save_profile(dir / "p.eyep", profiles.begin()->second);
  c.check(load_profile(dir / "p.eyep").mean_neutral == profiles.begin()->second.mean_neutral,
          "profile round-trip is bit-exact");

  auto rejects = [&](const std::string& name, const std::string& content, auto loader) {
    write_bytes(dir / name, content);
    try {
      loader(dir / name);
    } catch (const FormatError&) {
      return true;
    } catch (const std::exception&) {
      return false;
    }
    return false;
  };
  const auto load_ckpt = [](const std::filesystem::path& p) { load_checkpoint(p); };
  const auto load_prof = [](const std::filesystem::path& p) { load_profile(p); };
  const auto load_img = [](const std::filesystem::path& p) { read_pgm(p); };
  const auto load_man = [](const std::filesystem::path& p) { read_manifest(p); };
  auto flipped = bytes;
  flipped[0] = 'X';
  auto version = bytes;
  version[4] = 7;
  const auto profile_bytes = read_bytes(dir / "p.eyep");
  const auto image_bytes = read_bytes(dir.path() / "a" / a[0].left_path);
  const auto manifest_bytes = read_bytes(dir / "a/manifest.jsonl");
  c.check(rejects("t.eyem", bytes.substr(0, bytes.size() / 2), load_ckpt), "truncated checkpoint rejected");
  c.check(rejects("c.eyem", flipped, load_ckpt), "checkpoint with bad magic rejected");
  c.check(rejects("v.eyem", version, load_ckpt), "checkpoint with unknown version rejected");
  c.check(rejects("t.eyep", profile_bytes.substr(0, profile_bytes.size() - 1), load_prof), "truncated profile rejected");
  c.check(rejects("t.pgm", image_bytes.substr(0, image_bytes.size() - 100), load_img), "truncated image rejected");
  c.check(rejects("c.jsonl", manifest_bytes.substr(0, 120), load_man), "truncated manifest rejected");
  return c.finish();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<bool()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                                    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(number)) continue;
    std::cerr << "criterion " << number << '\n';
    try {
      if (!criteria[i]()) ++failed;
    } catch (const std::exception& e) {
      std::cout << "FAIL criterion " << number << ": raised " << e.what() << std::endl;
      ++failed;
    }
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
