#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "eyemotion/dataset.hpp"
#include "eyemotion/rng.hpp"
#include "eyemotion/stats.hpp"
#include "eyemotion/training.hpp"

namespace eyemotion {

// ---------------------------------------------------------------------------
// Metrics

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Per-class precision/recall/F1/support plus the confusion matrix
/// (rows are true classes, columns predictions).
struct EvaluationReport {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<ClassMetrics> per_class;
  std::size_t total = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
};

inline double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline EvaluationReport report_from_confusion(std::vector<std::string> classes,
                                              std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t C = classes.size();
  if (confusion.size() != C) throw InputError("confusion matrix size does not match class count");
  EvaluationReport r;
  r.classes = std::move(classes);
  r.confusion = std::move(confusion);
  r.per_class.resize(C);
  std::size_t trace = 0;
  for (std::size_t i = 0; i < C; ++i) {
    if (r.confusion[i].size() != C) throw InputError("confusion matrix must be square");
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < C; ++j) {
      row += r.confusion[i][j];
      col += r.confusion[j][i];
    }
    const double tp = static_cast<double>(r.confusion[i][i]);
    auto& m = r.per_class[i];
    m.support = row;
    m.precision = col ? tp / static_cast<double>(col) : 0.0;
    m.recall = row ? tp / static_cast<double>(row) : 0.0;
    m.f1 = f1_score(m.precision, m.recall);
    r.total += row;
    trace += r.confusion[i][i];
  }
  if (r.total == 0) return r;
  r.accuracy = static_cast<double>(trace) / static_cast<double>(r.total);
  for (const auto& m : r.per_class) {
    const double w = static_cast<double>(m.support) / static_cast<double>(r.total);
    r.macro_precision += m.precision / static_cast<double>(C);
    r.macro_recall += m.recall / static_cast<double>(C);
    r.macro_f1 += m.f1 / static_cast<double>(C);
    r.weighted_precision += w * m.precision;
    r.weighted_recall += w * m.recall;
    r.weighted_f1 += w * m.f1;
  }
  return r;
}

inline EvaluationReport report_from_predictions(std::vector<std::string> classes, std::span<const std::size_t> truth,
                                                std::span<const std::size_t> predicted) {
  if (truth.size() != predicted.size()) throw InputError("truth and prediction counts differ");
  const std::size_t C = classes.size();
  std::vector<std::vector<std::size_t>> confusion(C, std::vector<std::size_t>(C, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= C || predicted[i] >= C) throw InputError("class index out of range");
    ++confusion[truth[i]][predicted[i]];
  }
  return report_from_confusion(std::move(classes), std::move(confusion));
}

/// Element-wise sum of confusion matrices.
inline EvaluationReport pool_reports(std::span<const EvaluationReport> reports) {
  if (reports.empty()) throw InputError("nothing to pool");
  auto confusion = reports.front().confusion;
  for (std::size_t r = 1; r < reports.size(); ++r)
    for (std::size_t i = 0; i < confusion.size(); ++i)
      for (std::size_t j = 0; j < confusion.size(); ++j) confusion[i][j] += reports[r].confusion[i][j];
  return report_from_confusion(reports.front().classes, std::move(confusion));
}

inline std::string report_csv(const EvaluationReport& r) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed;
  os << "class,precision,recall,f1,support\n";
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    const auto& m = r.per_class[i];
    os << r.classes[i] << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.support << '\n';
  }
  return os.str();
}

inline nlohmann::json report_json(const EvaluationReport& r) {
  return {{"mean_accuracy", r.accuracy}, {"macro_f1", r.macro_f1}, {"weighted_f1", r.weighted_f1},
          {"confusion", r.confusion}};
}

// ---------------------------------------------------------------------------
// Folds

/// Participant-to-fold assignment for participant-holdout cross-validation.
struct FoldPlan {
  std::size_t k = 5;
  std::map<int, std::size_t> assignment;

  std::vector<int> test_participants(std::size_t fold) const {
    std::vector<int> out;
    for (const auto& [pid, f] : assignment)
      if (f == fold) out.push_back(pid);
    return out;
  }
};

/// Shuffles participants with `seed` and deals them round-robin, so fold
/// sizes differ by at most one.
inline FoldPlan make_folds(std::vector<int> participants, std::size_t k, std::uint64_t seed) {
  std::sort(participants.begin(), participants.end());
  if (std::adjacent_find(participants.begin(), participants.end()) != participants.end()) {
    throw InputError("duplicate participant ids");
  }
  if (k < 2 && participants.size() > 1) throw InputError("need at least 2 folds");
  if (k == 0 || k > participants.size()) {
    throw InputError("cannot split " + std::to_string(participants.size()) + " participants into " +
                     std::to_string(k) + " folds");
  }
  Rng rng(derive_seed(seed, {0x464F4C44ULL}));
  rng.shuffle(participants);
  FoldPlan plan;
  plan.k = k;
  for (std::size_t i = 0; i < participants.size(); ++i) plan.assignment[participants[i]] = i % k;
  return plan;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Prediction {
  std::size_t frame = 0;  // index into the frame set
  std::size_t truth = 0;
  std::size_t predicted = 0;
};

struct Evaluation {
  EvaluationReport report;
  std::vector<Prediction> predictions;
};

/// Argmax decisions (ties to the lowest class index) over `indices`. A
/// personalized model requires `profiles`.
inline Evaluation evaluate(const Classifier& model, const FrameSet& set, std::span<const std::size_t> indices,
                           const ProfileTable* profiles) {
  if (indices.empty()) throw InputError("evaluation set is empty");
  if (!(model.labels == set.labels)) throw InputError("model classes do not match the data label set");
  if (model.personalized && !profiles) throw InputError("personalized model needs personalization profiles");
  Evaluation out;
  std::vector<std::size_t> truth, predicted;
  for (auto i : indices) {
    const auto& f = set.frames.at(i);
    const PersonalizationProfile* profile = nullptr;
    if (model.personalized) {
      const auto it = profiles->find({f.sample.participant_id, f.sample.session_id});
      if (it == profiles->end()) {
        throw InputError("missing personalization profile for participant " + std::to_string(f.sample.participant_id) +
                         " session " + std::to_string(f.sample.session_id));
      }
      profile = &it->second;
    }
    const auto trace = forward(model.net, assemble_input(f.image, profile, nullptr));
    const std::size_t p = argmax(trace.output().values());
    out.predictions.push_back({i, f.label, p});
    truth.push_back(f.label);
    predicted.push_back(p);
  }
  out.report = report_from_predictions(set.labels.classes(), truth, predicted);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

/// Throws if any training frame belongs to a held-out participant.
inline void check_no_leakage(const FrameSet& set, std::span<const std::size_t> train_indices,
                             const std::vector<int>& test_participants) {
  const std::set<int> held_out(test_participants.begin(), test_participants.end());
  for (auto i : train_indices) {
    const auto& s = set.frames.at(i).sample;
    if (held_out.count(s.participant_id)) {
      throw LeakageError("frame " + std::to_string(s.frame_index) + " (" + s.label + ") of held-out participant " +
                         std::to_string(s.participant_id) + " is in the training split");
    }
  }
}

struct FoldSplit {
  std::vector<int> test_participants;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Enrollment frames are never samples; they only build profiles.
inline std::vector<FoldSplit> make_splits(const FrameSet& set, const EnrollmentSplit& enrollment, const FoldPlan& plan) {
  std::vector<FoldSplit> splits(plan.k);
  for (std::size_t f = 0; f < plan.k; ++f) splits[f].test_participants = plan.test_participants(f);
  for (auto i : enrollment.samples) {
    const int pid = set.frames[i].sample.participant_id;
    const auto it = plan.assignment.find(pid);
    if (it == plan.assignment.end()) throw InputError("participant " + std::to_string(pid) + " is not in the fold plan");
    for (std::size_t f = 0; f < plan.k; ++f) (f == it->second ? splits[f].test : splits[f].train).push_back(i);
  }
  return splits;
}

struct FoldResult {
  std::size_t fold = 0;
  std::vector<int> test_participants;
  EvaluationReport report;
  std::vector<Prediction> predictions;
  std::vector<double> epoch_losses;
};

struct CrossvalRun {
  bool personalized = false;
  std::vector<FoldResult> folds;
  EvaluationReport pooled;
};

/// Trains and evaluates one model per fold. Profiles for every
/// (participant, session) come from that session's own enrollment frames.
/// Folds run on up to `workers` threads; results do not depend on it.
inline CrossvalRun crossval(const FrameSet& set, const TrainConfig& base_config, const FoldPlan& plan, bool personalize,
                            unsigned workers = 1) {
  const auto enrollment = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  const auto profiles = build_profiles(set.frames, enrollment.enrollment, set.frame_rate);
  const auto splits = make_splits(set, enrollment, plan);
  TrainConfig config = base_config;
  config.personalize = personalize;

  auto run_fold = [&](std::size_t f) {
    const auto& split = splits[f];
    check_no_leakage(set, split.train, split.test_participants);
    const auto examples = make_examples(set, split.train, personalize ? &profiles : nullptr);
    auto trained = train(examples, set.labels, config);
    auto eval = evaluate(trained.model, set, split.test, &profiles);
    return FoldResult{f, split.test_participants, std::move(eval.report), std::move(eval.predictions),
                      std::move(trained.epoch_losses)};
  };

  CrossvalRun run;
  run.personalized = personalize;
  run.folds.resize(plan.k);
  workers = std::max(1u, workers);
  for (std::size_t start = 0; start < plan.k; start += workers) {
    std::vector<std::future<FoldResult>> pending;
    for (std::size_t f = start; f < std::min<std::size_t>(plan.k, start + workers); ++f) {
      pending.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, run_fold, f));
    }
    for (std::size_t j = 0; j < pending.size(); ++j) run.folds[start + j] = pending[j].get();
  }
  std::vector<EvaluationReport> reports;
  for (const auto& f : run.folds) reports.push_back(f.report);
  run.pooled = pool_reports(reports);
  return run;
}

enum class SessionWeighting { equal, per_frame };

/// Per-subject accuracy: the mean over (session, condition) cells of each
/// cell's accuracy (equal weighting), or correct / total (per-frame).
inline std::map<int, double> subject_accuracy(const FrameSet& set, const CrossvalRun& run, SessionWeighting weighting) {
  std::map<std::tuple<int, int, std::size_t>, std::pair<std::size_t, std::size_t>> cells;  // correct, total
  for (const auto& fold : run.folds)
    for (const auto& p : fold.predictions) {
      const auto& s = set.frames[p.frame].sample;
      auto& c = cells[{s.participant_id, s.session_id, p.truth}];
      c.first += p.truth == p.predicted ? 1 : 0;
      c.second += 1;
    }
  std::map<int, std::pair<double, double>> acc;  // numerator, denominator
  for (const auto& [key, c] : cells) {
    auto& a = acc[std::get<0>(key)];
    if (weighting == SessionWeighting::equal) {
      a.first += static_cast<double>(c.first) / static_cast<double>(c.second);
      a.second += 1.0;
    } else {
      a.first += static_cast<double>(c.first);
      a.second += static_cast<double>(c.second);
    }
  }
  std::map<int, double> out;
  for (const auto& [pid, a] : acc) out[pid] = a.first / a.second;
  return out;
}

/// Pairs per-subject accuracies of personalized and baseline runs; with
/// several runs per mode (seeds), each subject's accuracies are averaged.
inline PairedSamples paired_samples(const FrameSet& set, std::span<const CrossvalRun> personalized,
                                    std::span<const CrossvalRun> baseline,
                                    SessionWeighting weighting = SessionWeighting::equal) {
  if (personalized.size() != baseline.size() || personalized.empty()) {
    throw InputError("need matching, non-empty personalized and baseline runs");
  }
  std::map<int, std::pair<double, double>> sums;
  for (std::size_t r = 0; r < personalized.size(); ++r) {
    for (const auto& [pid, a] : subject_accuracy(set, personalized[r], weighting)) sums[pid].first += a;
    for (const auto& [pid, a] : subject_accuracy(set, baseline[r], weighting)) sums[pid].second += a;
  }
  PairedSamples out;
  const double n = static_cast<double>(personalized.size());
  for (const auto& [pid, s] : sums) out.pairs.push_back({pid, s.first / n, s.second / n});
  return out;
}

}  // namespace eyemotion
