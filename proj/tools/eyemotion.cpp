// eyemotion: dataset generation, training, cross-validation, evaluation,
// streaming inference and statistics from one executable.
//
// Exit codes: 0 success, 2 bad usage or configuration, 1 runtime failure.
// Failures print one line "<error_kind>: <message>" on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eyemotion/blink.hpp"
#include "eyemotion/checkpoint.hpp"
#include "eyemotion/dataset.hpp"
#include "eyemotion/evaluation.hpp"
#include "eyemotion/run_config.hpp"
#include "eyemotion/runtime.hpp"
#include "eyemotion/stats.hpp"

namespace fs = std::filesystem;
using namespace eyemotion;

namespace {

constexpr std::size_t kPermutationDraws = 100000;

// Flag values; unset flags leave the config untouched.
struct Overrides {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> participants, sessions, frames_per_expression, hmd;
  std::optional<std::string> label_set, personalize, input_size, weighting;
  std::optional<double> blink_rate, lr, lr_decay, l2, alpha, threshold;
  std::optional<std::size_t> k, epochs, batch, seeds;
  std::optional<unsigned> workers;
  bool blink_filter = false;
};

void add_seed(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Seed for all randomness");
  cmd->add_option("--config", o.config_path, "Canonical JSON run config")->check(CLI::ExistingFile);
}

void add_gen_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--participants", o.participants, "Number of participants")->check(CLI::PositiveNumber);
  cmd->add_option("--sessions", o.sessions, "Sessions per participant")->check(CLI::PositiveNumber);
  cmd->add_option("--frames-per-expression", o.frames_per_expression, "Frames per expression per session (0: auto)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--hmd", o.hmd, "Headset model")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--label-set", o.label_set, "Label vocabulary")->check(CLI::IsMember({"au10", "emo5"}));
  cmd->add_option("--blink-rate", o.blink_rate, "Fraction of frames with an injected blink")->check(CLI::Range(0.0, 0.2));
}

void add_train_flags(CLI::App* cmd, Overrides& o, bool allow_both) {
  cmd->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--batch", o.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "Initial learning rate")->check(CLI::PositiveNumber);
  cmd->add_option("--lr-decay", o.lr_decay, "Per-epoch learning-rate factor")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--l2", o.l2, "L2 weight on weights")->check(CLI::NonNegativeNumber);
  cmd->add_option("--input-size", o.input_size, "Network input as HxW");
  auto modes = allow_both ? std::vector<std::string>{"on", "off", "both"} : std::vector<std::string>{"on", "off"};
  cmd->add_option("--personalize", o.personalize, "Mean-neutral subtraction")->check(CLI::IsMember(modes));
  cmd->add_flag("--blink-filter", o.blink_filter, "Drop frames the blink classifier marks as closed");
  cmd->add_option("--threshold", o.threshold, "Blink classifier threshold")->check(CLI::Range(0.0, 1.0));
}

void apply(const Overrides& o, RunConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.participants) c.gen.num_participants = *o.participants;
  if (o.sessions) c.gen.sessions = *o.sessions;
  if (o.frames_per_expression) c.gen.frames_per_expression = *o.frames_per_expression;
  if (o.hmd) c.gen.hmd_id = *o.hmd;
  if (o.label_set) c.gen.label_set = parse_label_set_kind(*o.label_set);
  if (o.blink_rate) c.blink_rate = *o.blink_rate;
  if (o.lr) c.train.initial_lr = *o.lr;
  if (o.lr_decay) c.train.lr_decay = *o.lr_decay;
  if (o.l2) c.train.l2_lambda = *o.l2;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch) c.train.batch_size = *o.batch;
  if (o.input_size) c.train.input_size = ImageSize::parse(*o.input_size);
  if (o.personalize) c.personalize = parse_personalize(*o.personalize);
  if (o.k) c.k = *o.k;
  if (o.seeds) c.seeds = *o.seeds;
  if (o.weighting) c.weighting = parse_weighting(*o.weighting);
  if (o.workers) c.workers = *o.workers;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.blink_filter) c.blink_filter = true;
  if (o.threshold) c.blink_threshold = *o.threshold;
  c.propagate_seed();
  c.validate();
}

// Defaults, then the generator settings recorded with the data, then the
// config file, then flags.
RunConfig resolve(const Overrides& o, const std::optional<fs::path>& data_dir) {
  RunConfig base;
  if (data_dir) {
    const auto recorded = *data_dir / "config.resolved.json";
    if (fs::exists(recorded)) {
      const auto data_cfg = load_run_config(recorded);
      base.gen = data_cfg.gen;
      base.blink_rate = data_cfg.blink_rate;
    }
  }
  RunConfig c = base;
  if (o.config_path) {
    std::ifstream in(*o.config_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(*o.config_path + ": " + e.what());
    }
    c = run_config_from_json(doc, base);
  }
  apply(o, c);
  return c;
}

// Label set of a manifest: the configured one if every label fits, else the
// one that covers all labels.
LabelSet labels_for(const Manifest& m, const RunConfig& c) {
  for (auto kind : {c.gen.label_set, LabelSetKind::emo5, LabelSetKind::au10}) {
    const auto ls = LabelSet::of(kind);
    bool ok = true;
    for (const auto& s : m.samples) ok = ok && ls.find(s.label).has_value();
    if (ok) return ls;
  }
  throw InputError("manifest labels do not belong to a known label set");
}

FrameSet load_data(const fs::path& dir, const RunConfig& c, ImageSize size) {
  const auto manifest = read_manifest(dir);
  if (manifest.samples.empty()) throw InputError("manifest " + dir.string() + " has no samples");
  return load_frames(manifest, labels_for(manifest, c), size, c.gen.frame_rate);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string profile_name(int pid, int sid) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03d_s%d.eyep", pid, sid);
  return buf;
}

// Removes frames the blink classifier flags. Enrollment frames are kept
// untouched; the classifier is trained on the remaining samples.
FrameSet apply_blink_filter(const FrameSet& set, const RunConfig& c, const fs::path& out) {
  const auto split = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  TrainConfig bc = c.train;
  bc.personalize = false;
  const auto model = train_blink_classifier(set, split.samples, bc);
  const auto result = blink_filter(set, split.samples, model, c.blink_threshold);
  nlohmann::json removed = nlohmann::json::object();
  for (const auto& [label, n] : result.removed_per_class) removed[label] = n;
  write_json(out / "blink.json", {{"threshold", c.blink_threshold},
                                  {"kept", result.kept.size()},
                                  {"removed", result.removed.size()},
                                  {"removed_per_class", removed}});
  std::vector<char> drop(set.frames.size(), 0);
  for (auto i : result.removed) drop[i] = 1;
  FrameSet filtered{set.labels, set.frame_rate, {}};
  for (std::size_t i = 0; i < set.frames.size(); ++i)
    if (!drop[i]) filtered.frames.push_back(set.frames[i]);
  return filtered;
}

int cmd_gen(const Overrides& o, const fs::path& out) {
  const auto c = resolve(o, std::nullopt);
  const auto samples = generate_dataset(c.gen, out, c.blink_rate);
  write_resolved_config(out, c);
  std::cout << "wrote " << samples.size() << " samples to " << out.string() << '\n';
  return 0;
}

int cmd_train(const Overrides& o, const fs::path& data, const fs::path& out) {
  const auto c = resolve(o, data);
  if (c.personalize == PersonalizeMode::both) throw ConfigError("train needs --personalize on or off");
  write_resolved_config(out, c);
  auto set = load_data(data, c, c.train.input_size);
  if (c.blink_filter) set = apply_blink_filter(set, c, out);
  const auto split = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  const auto profiles = build_profiles(set.frames, split.enrollment, set.frame_rate);
  TrainConfig tc = c.train;
  tc.personalize = c.personalize == PersonalizeMode::on;
  const auto examples = make_examples(set, split.samples, tc.personalize ? &profiles : nullptr);
  const auto result = train(examples, set.labels, tc);
  save_checkpoint(result.model, out / "model.eyem");
  if (tc.personalize) {
    fs::create_directories(out / "profiles");
    for (const auto& [key, profile] : profiles) save_profile(out / "profiles" / profile_name(key.first, key.second), profile);
  }
  write_json(out / "train.json", {{"samples", examples.size()}, {"epoch_losses", result.epoch_losses}});
  std::cout << "trained on " << examples.size() << " samples, final loss " << result.epoch_losses.back() << '\n';
  return 0;
}

nlohmann::json ttest_json(const TTestResult& t, const PairedSamples& pairs, std::uint64_t seed) {
  const auto d = pairs.differences();
  nlohmann::json j = {{"n", d.size()},
                      {"t", std::isfinite(t.t) ? nlohmann::json(t.t) : nlohmann::json(t.t > 0 ? "inf" : "-inf")},
                      {"degrees_of_freedom", t.degrees_of_freedom},
                      {"p", t.p},
                      {"mean_difference", t.mean_difference},
                      {"degenerate", t.degenerate},
                      {"alternative", "personalized > baseline"}};
  j["permutation_p"] = sign_flip_permutation_p(d, kPermutationDraws, derive_seed(seed, {0x5045524DULL}));
  j["permutation_draws"] = kPermutationDraws;
  return j;
}

int cmd_crossval(const Overrides& o, const fs::path& data, const fs::path& out) {
  const auto c = resolve(o, data);
  write_resolved_config(out, c);
  auto set = load_data(data, c, c.train.input_size);
  if (c.blink_filter) set = apply_blink_filter(set, c, out);
  std::vector<bool> modes;
  if (c.personalize != PersonalizeMode::off) modes.push_back(true);
  if (c.personalize != PersonalizeMode::on) modes.push_back(false);

  std::map<bool, std::vector<CrossvalRun>> runs;
  for (std::size_t s = 0; s < c.seeds; ++s) {
    const std::uint64_t seed = c.seed + s;
    const auto plan = make_folds(participants_of(set.frames), c.k, seed);
    TrainConfig tc = c.train;
    tc.seed = seed;
    tc.augment.seed = seed;
    for (bool pers : modes) {
      auto run = crossval(set, tc, plan, pers, c.workers);
      const std::string tag = std::string(pers ? "on" : "off") + "_seed" + std::to_string(seed);
      for (const auto& f : run.folds) write_text(out / "folds" / (tag + "_fold" + std::to_string(f.fold) + ".csv"), report_csv(f.report));
      std::cerr << "personalize=" << (pers ? "on" : "off") << " seed=" << seed << " accuracy=" << run.pooled.accuracy << '\n';
      runs[pers].push_back(std::move(run));
    }
  }
  for (bool pers : modes) {
    std::vector<EvaluationReport> pooled;
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& r : runs[pers]) {
      pooled.push_back(r.pooled);
      per_seed.push_back(report_json(r.pooled));
    }
    auto j = report_json(pool_reports(pooled));
    j["seeds"] = per_seed;
    const std::string mode = pers ? "on" : "off";
    write_json(out / ("pooled_" + mode + ".json"), j);
    write_text(out / ("pooled_" + mode + ".csv"), report_csv(pool_reports(pooled)));
  }
  if (c.personalize == PersonalizeMode::both) {
    const auto pairs = paired_samples(set, runs[true], runs[false], c.weighting);
    std::ostringstream csv;
    csv.precision(17);
    csv << "participant,personalized,baseline\n";
    for (const auto& p : pairs.pairs) csv << p.participant_id << ',' << p.personalized << ',' << p.baseline << '\n';
    write_text(out / "pairs.csv", csv.str());
    auto j = ttest_json(paired_one_tailed_ttest(pairs), pairs, c.seed);
    j["session_weighting"] = to_string(c.weighting);
    write_json(out / "ttest.json", j);
  }
  return 0;
}

int cmd_eval(const Overrides& o, const fs::path& model_path, const fs::path& data, const fs::path& out) {
  const auto c = resolve(o, data);
  write_resolved_config(out, c);
  const auto model = load_checkpoint(model_path);
  const auto manifest = read_manifest(data);
  const auto set = load_frames(manifest, model.labels, model.input_size(), c.gen.frame_rate);
  const auto split = split_enrollment(set.frames, set.labels, enrollment_window(set.frame_rate));
  const auto profiles = build_profiles(set.frames, split.enrollment, set.frame_rate);
  const auto result = evaluate(model, set, split.samples, &profiles);
  write_text(out / "report.csv", report_csv(result.report));
  write_json(out / "report.json", report_json(result.report));
  std::cout << "accuracy " << result.report.accuracy << " macro_f1 " << result.report.macro_f1 << '\n';
  return 0;
}

int cmd_infer(const Overrides& o, const fs::path& model_path, const fs::path& data,
              const std::optional<std::string>& profile_path, const std::optional<fs::path>& out) {
  const auto c = resolve(o, data);
  if (out) write_resolved_config(*out, c);
  const auto model = load_checkpoint(model_path);
  const auto manifest = read_manifest(data);
  const auto labels = labels_for(manifest, c);
  const auto size = model.input_size();

  // Enrollment frames build profiles; every other sample is streamed.
  std::vector<Frame> enrollment_frames;
  std::vector<FrameRequest> requests;
  {
    std::map<SessionKey, std::size_t> seen_neutral;
    const std::size_t window = enrollment_window(c.gen.frame_rate);
    std::vector<std::size_t> order(manifest.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto &x = manifest.samples[a], &y = manifest.samples[b];
      return std::tie(x.participant_id, x.session_id, x.frame_index) <
             std::tie(y.participant_id, y.session_id, y.frame_index);
    });
    std::vector<char> is_enrollment(order.size(), 0);
    for (auto i : order) {
      const auto& s = manifest.samples[i];
      if (s.label == labels[labels.neutral()] && seen_neutral[{s.participant_id, s.session_id}]++ < window)
        is_enrollment[i] = 1;
    }
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
      const auto& s = manifest.samples[i];
      if (is_enrollment[i]) {
        if (!profile_path && model.personalized) {
          enrollment_frames.push_back({s, labels.neutral(),
                                       rectify_and_concat(read_pgm(manifest.root / s.left_path),
                                                          read_pgm(manifest.root / s.right_path), size,
                                                          provenance_of(s))});
        }
      } else {
        requests.push_back({(manifest.root / s.left_path).string(), (manifest.root / s.right_path).string(),
                            s.participant_id, s.session_id});
      }
    }
  }
  ProfileTable profiles;
  std::optional<PersonalizationProfile> fixed;
  if (profile_path) {
    fixed = load_profile(*profile_path);
  } else if (model.personalized) {
    std::vector<std::size_t> all(enrollment_frames.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    profiles = build_profiles(enrollment_frames, all, c.gen.frame_rate);
  }
  const FrameLoader load = [&](const FrameRequest& r) {
    return rectify_and_concat(read_pgm(r.left_path), read_pgm(r.right_path), size,
                              {r.participant_id, r.session_id, -1});
  };
  const ProfileLookup lookup = [&](const FrameRequest& r) -> const PersonalizationProfile* {
    if (fixed) return &*fixed;
    const auto it = profiles.find({r.participant_id, r.session_id});
    return it == profiles.end() ? nullptr : &it->second;
  };
  StreamSummary summary;
  if (out) {
    std::ofstream stream(*out / "stream.jsonl", std::ios::binary);
    if (!stream) throw IoError("cannot write " + (*out / "stream.jsonl").string());
    summary = stream_run(model, requests, load, lookup, c.alpha, stream, c.gen.frame_rate);
  } else {
    summary = stream_run(model, requests, load, lookup, c.alpha, std::cout, c.gen.frame_rate);
  }
  std::cerr << "frames " << summary.frames << " p50_ms " << summary.p50_ms << " p99_ms " << summary.p99_ms << '\n';
  return 0;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

// Ratings CSV rows are (item_id, rater_id, label); an optional header row is
// skipped. Items and raters keep their first-seen order.
RatingMatrix read_ratings(const fs::path& path) {
  auto rows = read_csv(path);
  if (!rows.empty() && rows.front().size() == 3 && rows.front()[0] == "item_id") rows.erase(rows.begin());
  std::map<std::string, std::size_t> items, raters;
  std::vector<std::tuple<std::size_t, std::size_t, std::string>> cells;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != 3) throw FormatError(path.string() + ": row " + std::to_string(r + 1) + " needs 3 fields");
    const auto i = items.emplace(rows[r][0], items.size()).first->second;
    const auto j = raters.emplace(rows[r][1], raters.size()).first->second;
    cells.emplace_back(i, j, rows[r][2]);
  }
  RatingMatrix m(items.size(), std::vector<std::optional<std::string>>(raters.size()));
  for (const auto& [i, j, label] : cells) {
    if (m[i][j]) throw InputError(path.string() + ": duplicate rating for an item/rater pair");
    m[i][j] = label;
  }
  return m;
}

int cmd_kappa(const fs::path& ratings, const std::string& mode) {
  const auto m = read_ratings(ratings);
  const double kappa = rater_agreement(m, mode == "cohen" ? KappaMode::cohen : KappaMode::fleiss);
  std::cout << nlohmann::json({{"mode", mode}, {"items", m.size()}, {"raters", m.front().size()}, {"kappa", kappa}}).dump(2)
            << '\n';
  return 0;
}

int cmd_ttest(const fs::path& pairs_path, std::uint64_t seed) {
  auto rows = read_csv(pairs_path);
  if (!rows.empty() && rows.front().size() == 3 && rows.front()[0] == "participant") rows.erase(rows.begin());
  PairedSamples pairs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != 3) throw FormatError(pairs_path.string() + ": row " + std::to_string(r + 1) + " needs 3 fields");
    try {
      pairs.pairs.push_back({std::stoi(rows[r][0]), std::stod(rows[r][1]), std::stod(rows[r][2])});
    } catch (const std::exception&) {
      throw FormatError(pairs_path.string() + ": row " + std::to_string(r + 1) + " is not numeric");
    }
  }
  std::cout << ttest_json(paired_one_tailed_ttest(pairs), pairs, seed).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periocular expression classification toolkit"};
  app.require_subcommand(1);
  Overrides o;
  std::string out, data, model, ratings, pairs, kappa_mode = "fleiss";
  std::optional<std::string> profile, infer_out;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic periocular dataset");
  add_seed(gen, o);
  add_gen_flags(gen, o);
  gen->add_option("--out", out, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a classifier on a dataset");
  add_seed(tr, o);
  add_train_flags(tr, o, false);
  tr->add_option("--data", data, "Dataset directory or manifest")->required();
  tr->add_option("--out", out, "Output directory")->required();

  auto* cv = app.add_subcommand("crossval", "Participant-holdout cross-validation");
  add_seed(cv, o);
  add_train_flags(cv, o, true);
  cv->add_option("--data", data, "Dataset directory or manifest")->required();
  cv->add_option("--out", out, "Output directory")->required();
  cv->add_option("--k", o.k, "Number of folds")->check(CLI::Range(2, 1000));
  cv->add_option("--seeds", o.seeds, "Number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber);
  cv->add_option("--session-weighting", o.weighting, "Per-subject aggregation")
      ->check(CLI::IsMember({"equal", "per_frame"}));
  cv->add_option("--workers", o.workers, "Folds trained in parallel")->check(CLI::PositiveNumber);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  add_seed(ev, o);
  ev->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory or manifest")->required();
  ev->add_option("--out", out, "Output directory")->required();

  auto* inf = app.add_subcommand("infer", "Stream a dataset through a checkpoint");
  add_seed(inf, o);
  inf->add_option("--model", model, "Checkpoint")->required()->check(CLI::ExistingFile);
  inf->add_option("--data", data, "Dataset directory or manifest")->required();
  inf->add_option("--profile", profile, "Personalization profile for every frame")->check(CLI::ExistingFile);
  inf->add_option("--alpha", o.alpha, "Smoothing factor")->check(CLI::Range(0.0, 1.0));
  inf->add_option("--out", infer_out, "Output directory (default: stdout)");

  auto* st = app.add_subcommand("stats", "Statistics on existing results");
  st->require_subcommand(1);
  auto* kp = st->add_subcommand("kappa", "Inter-rater agreement");
  kp->add_option("--ratings", ratings, "CSV of item_id,rater_id,label")->required()->check(CLI::ExistingFile);
  kp->add_option("--mode", kappa_mode, "cohen or fleiss")->check(CLI::IsMember({"cohen", "fleiss"}));
  auto* tt = st->add_subcommand("ttest", "Paired one-tailed t-test");
  tt->add_option("--pairs", pairs, "CSV of participant,personalized,baseline")->required()->check(CLI::ExistingFile);
  tt->add_option("--seed", o.seed, "Seed of the permutation oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "usage_error: " << e.what() << '\n';
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*gen) return cmd_gen(o, out);
    if (*tr) return cmd_train(o, data, out);
    if (*cv) return cmd_crossval(o, data, out);
    if (*ev) return cmd_eval(o, model, data, out);
    if (*inf) return cmd_infer(o, model, data, profile, infer_out ? std::optional<fs::path>(*infer_out) : std::nullopt);
    if (*kp) return cmd_kappa(ratings, kappa_mode);
    if (*tt) return cmd_ttest(pairs, o.seed.value_or(0));
  } catch (const ConfigError& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io_error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal_error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
