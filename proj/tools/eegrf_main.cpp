// eegrf command-line front end. Every subcommand reads files and flags and
// writes files; rerunning it on the same inputs gives byte-identical output
// (except `serve`, which records wall-clock arrival times).

#include <csignal>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "CLI11.hpp"

#include "eegrf/errors.hpp"
#include "eegrf/experiment.hpp"
#include "eegrf/fixtures.hpp"
#include "eegrf/metrics.hpp"
#include "eegrf/planner.hpp"
#include "eegrf/retrieval.hpp"
#include "eegrf/service.hpp"
#include "eegrf/signal_pipeline.hpp"
#include "eegrf/svm.hpp"
#include "eegrf/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace eegrf;

namespace {

fs::path with_suffix(const fs::path& base, const std::string& suffix) { return fs::path(base.string() + suffix); }

// Strips a known array-file suffix so both `q1` and `q1.feat.json` work.
fs::path strip(const fs::path& p, const std::string& suffix) {
  const std::string s = p.string();
  if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return s.substr(0, s.size() - suffix.size());
  }
  return p;
}

UserProfile resolve_profile(const std::string& spec) {
  if (spec == "expert") return expert_profile();
  if (spec == "novice") return novice_profile();
  return load_user_profile(spec);
}

// Image manifests carry is_target, feature truth files is_relevant.
std::pair<std::vector<std::string>, std::vector<bool>> load_labeled_ids(const fs::path& path) {
  const json j = load_json(path);
  try {
    auto ids = j.at("image_ids").get<std::vector<std::string>>();
    auto flags = j.contains("is_target") ? j.at("is_target").get<std::vector<bool>>()
                                         : j.at("is_relevant").get<std::vector<bool>>();
    if (ids.size() != flags.size()) throw FormatError(path.string() + ": image_ids and labels differ in length");
    return {std::move(ids), std::move(flags)};
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> display_order(const RsvpPlan& plan) {
  std::vector<std::string> ids;
  for (const auto& item : plan.presentation_order()) ids.push_back(item.image_id);
  return ids;
}

std::unordered_set<std::string> plan_targets(const RsvpPlan& plan) {
  std::unordered_set<std::string> targets;
  for (const auto& item : plan.presentation_order()) {
    if (item.is_target) targets.insert(item.image_id);
  }
  return targets;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------- gen-plan

struct GenPlanArgs {
  std::string manifest;
  int rate = 5;
  std::uint64_t seed = 1;
  std::uint64_t session_seed = 1;
  std::string query_id = "q1";
  double gap = 5.0;
  std::string out;
};

void run_gen_plan(const GenPlanArgs& a) {
  const auto [ids, flags] = load_labeled_ids(a.manifest);
  const SessionImages session = select_session_images(ids, flags, a.session_seed);
  const RsvpPlan plan = build_plan(session.targets, session.distractors, a.rate, a.seed, a.query_id, a.gap);
  save_plan(plan, a.out);
  std::cout << "plan " << plan.query_id << ": " << plan.blocks.size() << " blocks, " << kImagesPerQuery
            << " images, stimulus span " << stimulus_span_s(plan) << " s\n";
}

// ------------------------------------------------------------- gen-dataset

struct GenDatasetArgs {
  int n = 1000;
  int n_targets = 50;
  std::uint64_t seed = 1;
  std::string out;
  ImageSetOptions options;
};

void run_gen_dataset(const GenDatasetArgs& a) {
  const ImageManifest m = gen_images(a.n, a.n_targets, GlyphSpec{}, a.seed, a.out, a.options);
  std::cout << "wrote " << m.image_ids.size() << " images (" << a.n_targets << " targets) and "
            << m.example_image_ids.size() << " examples to " << a.out << "\n";
}

// ------------------------------------------------------------ gen-features

struct GenFeaturesArgs {
  FeatureSetOptions options;
  std::uint64_t seed = 1;
  std::string out;
};

void run_gen_features(const GenFeaturesArgs& a) {
  const FeatureSet set = gen_feature_set(a.options, a.seed);
  save_feature_matrix(set.matrix, a.out);
  save_json(feature_truth_json(set), with_suffix(a.out, ".truth.json"));
  std::cout << "wrote " << set.matrix.n_rows() << " x " << set.matrix.n_dims() << " features to " << a.out
            << ".feat.json\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string profile;
  std::string plan;
  std::string out;
  SimulationOptions options;
};

void run_simulate(const SimulateArgs& a) {
  const UserProfile profile = resolve_profile(a.profile);
  const RsvpPlan plan = load_plan(a.plan);
  const SimulatedSession sim = simulate_recording(plan, profile, a.options);
  save_recording(sim.recording, a.out);
  save_markers(sim.markers, with_suffix(a.out, ".markers.jsonl"));
  save_log(sim.presses, with_suffix(a.out, ".buttons.json"));
  std::cout << "simulated " << sim.recording.n_channels() << " channels x " << sim.recording.n_samples()
            << " samples at " << sim.recording.sample_rate_hz << " Hz, " << sim.markers.size() << " markers\n";
}

// -------------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::string rec;
  std::string markers;
  std::string config;
  bool truncated = false;
  std::string out;
};

void run_preprocess(const PreprocessArgs& a) {
  PipelineConfig cfg;
  if (!a.config.empty()) cfg = pipeline_config_from_json(load_json(a.config));
  if (a.truncated) cfg.span_mode = SpanMode::kTruncated;
  const RawRecording rec = load_recording(strip(a.rec, ".rec.json"));
  const auto markers = load_markers(a.markers);
  const LabeledFeatures f = preprocess_session(rec, markers, cfg);
  save_feature_matrix(f.matrix, a.out);
  std::cout << "features " << f.matrix.n_rows() << " x " << f.matrix.n_dims() << ", " << f.n_targets()
            << " target rows\n";
}

// ---------------------------------------------------------------- eval-eeg

struct EvalArgs {
  std::string queries;
  double c = 1.0;
  std::uint64_t seed = 0;
  std::string out;
};

void run_eval_eeg(const EvalArgs& a) {
  const auto prefixes = split_list(a.queries);
  if (prefixes.size() != 3) {
    throw PreconditionError("--queries needs exactly 3 comma-separated prefixes, got " +
                            std::to_string(prefixes.size()));
  }
  std::vector<LabeledFeatures> sessions;
  std::vector<std::string> query_ids;
  std::vector<std::vector<std::string>> orders;
  for (const auto& raw : prefixes) {
    const fs::path base = strip(raw, ".feat.json");
    const fs::path markers_path = with_suffix(base, ".markers.jsonl");
    const auto markers = load_markers(markers_path);
    LabeledFeatures lf;
    lf.matrix = load_feature_matrix(base);
    if (markers.size() != lf.matrix.n_rows()) {
      throw DataError(markers_path.string() + ": " + std::to_string(markers.size()) + " markers for " +
                      std::to_string(lf.matrix.n_rows()) + " feature rows");
    }
    std::vector<std::string> order;
    for (std::size_t i = 0; i < markers.size(); ++i) {
      if (markers[i].image_id != lf.matrix.image_ids[i]) {
        throw DataError(markers_path.string() + ": marker " + std::to_string(i) + " is '" + markers[i].image_id +
                        "' but feature row is '" + lf.matrix.image_ids[i] + "'");
      }
      lf.is_target.push_back(markers[i].is_target);
      order.push_back(markers[i].image_id);
    }
    query_ids.push_back(markers.empty() || markers.front().query_id.empty() ? base.filename().string()
                                                                            : markers.front().query_id);
    orders.push_back(std::move(order));
    sessions.push_back(std::move(lf));
  }
  SvmOptions svm;
  svm.c = a.c;
  svm.seed = a.seed;
  const auto scores = cross_query_scores(sessions, svm);

  json report{{"queries", json::array()}, {"svm", {{"c", svm.c}, {"seed", svm.seed}}}};
  std::ostringstream csv;
  std::ostringstream roc_csv;
  csv << "query_id,n_rows,n_targets,auc,ap\n";
  roc_csv << "query_id,fpr,tpr,threshold\n";
  std::vector<double> aucs;
  std::vector<double> aps;
  for (std::size_t q = 0; q < sessions.size(); ++q) {
    const double auc = roc_auc(scores[q], sessions[q].is_target);
    const Ranking ranking = ranking_from_scores(query_ids[q], sessions[q].matrix.image_ids, scores[q], orders[q]);
    std::unordered_set<std::string> targets;
    for (std::size_t i = 0; i < sessions[q].is_target.size(); ++i) {
      if (sessions[q].is_target[i]) targets.insert(sessions[q].matrix.image_ids[i]);
    }
    const double ap = average_precision(ranking, targets);
    aucs.push_back(auc);
    aps.push_back(ap);
    const fs::path ranking_path = with_suffix(a.out, "." + query_ids[q] + ".ranking.csv");
    save_ranking(ranking, ranking_path);
    report["queries"].push_back({{"query_id", query_ids[q]},
                                 {"n_rows", sessions[q].matrix.n_rows()},
                                 {"n_targets", sessions[q].n_targets()},
                                 {"auc", auc},
                                 {"ap", ap},
                                 {"ranking", ranking_path.filename().string()}});
    csv << query_ids[q] << ',' << sessions[q].matrix.n_rows() << ',' << sessions[q].n_targets() << ','
        << format_double(auc) << ',' << format_double(ap) << '\n';
    for (const auto& p : roc_curve(scores[q], sessions[q].is_target)) {
      roc_csv << query_ids[q] << ',' << format_double(p.fpr) << ',' << format_double(p.tpr) << ','
              << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << '\n';
    }
    std::cout << query_ids[q] << ": AUC " << auc << ", AP " << ap << "\n";
  }
  report["mean_auc"] = mean(aucs);
  report["map"] = mean_ap(aps);
  save_json(report, with_suffix(a.out, ".json"));
  save_text(csv.str(), with_suffix(a.out, ".csv"));
  save_text(roc_csv.str(), with_suffix(a.out, ".roc.csv"));
  std::cout << "mean AUC " << mean(aucs) << ", mAP " << mean_ap(aps) << "\n";
}

// -------------------------------------------------------------------- rank

struct RankArgs {
  std::string from;
  std::string plan;
  std::string scores;
  std::string log;
  std::string out;
  std::string report;
  std::string labels_out;
  int n_pos = 10;
  int n_neg = 100;
};

void run_rank(const RankArgs& a) {
  const RsvpPlan plan = load_plan(a.plan);
  const auto order = display_order(plan);
  Ranking ranking;
  FeedbackLabels labels;
  json report{{"from", a.from}, {"query_id", plan.query_id}};
  if (a.from == "eeg") {
    if (a.scores.empty()) throw PreconditionError("rank --from eeg needs --scores");
    const Ranking scored = load_ranking(a.scores, plan.query_id);
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& e : scored.entries) {
      if (!e.score) throw DataError(a.scores + ": entry '" + e.image_id + "' has no score");
      ids.push_back(e.image_id);
      values.push_back(*e.score);
    }
    ranking = ranking_from_scores(plan.query_id, ids, values, order);
    if (!a.labels_out.empty()) {
      labels = select_feedback_labels_eeg(ranking, static_cast<std::size_t>(a.n_pos),
                                          static_cast<std::size_t>(a.n_neg));
    }
  } else {
    if (a.log.empty()) throw PreconditionError("rank --from mouse needs --log");
    const AnnotationLog log = load_log(a.log);
    const AnnotationSets sets = annotation_sets(log, order);
    ranking = ranking_from_annotations(sets, plan.query_id);
    report["n_positive"] = sets.p_a.size();
    report["n_negative"] = sets.n_a.size();
    if (!a.labels_out.empty()) labels = select_feedback_labels_mouse(sets);
  }
  check_permutation(ranking, order);
  const double ap = average_precision(ranking, plan_targets(plan));
  report["ap"] = ap;
  save_ranking(ranking, a.out);
  if (!a.report.empty()) save_json(report, a.report);
  if (!a.labels_out.empty()) save_json(to_json(labels), a.labels_out);
  std::cout << "AP " << ap << "\n";
}

// ---------------------------------------------------------------- feedback

struct FeedbackArgs {
  std::string labels;
  std::string features;
  std::string truth;
  std::string out;
  std::string report;
  double c = 1.0;
  std::uint64_t seed = 0;
};

void run_feedback(const FeedbackArgs& a) {
  const FeedbackLabels labels = labels_from_json(load_json(a.labels));
  const FeatureMatrix features = load_feature_matrix(strip(a.features, ".feat.json"));
  SvmOptions svm;
  svm.c = a.c;
  svm.seed = a.seed;
  const Ranking ranking = feedback_rank(labels, features, {}, svm);
  save_ranking(ranking, a.out);
  json report{{"n_rows", features.n_rows()},
              {"n_positives", labels.positives.size()},
              {"n_negatives", labels.negatives.size()}};
  if (!a.truth.empty()) {
    const auto relevant_flags = load_feature_truth(a.truth, features);
    std::unordered_set<std::string> relevant;
    for (std::size_t i = 0; i < relevant_flags.size(); ++i) {
      if (relevant_flags[i]) relevant.insert(features.image_ids[i]);
    }
    const double ap = average_precision(ranking, relevant);
    report["ap"] = ap;
    std::cout << "AP " << ap << "\n";
  }
  if (!a.report.empty()) save_json(report, a.report);
}

// ----------------------------------------------------------------- compare

struct CompareArgs {
  std::string config;
  std::string out;
  int n_seeds = 0;
};

void run_compare_cmd(const CompareArgs& a) {
  const fs::path config_path(a.config);
  CompareConfig config = compare_config_from_json(load_json(config_path), config_path.parent_path());
  if (a.n_seeds > 0) config.n_seeds = a.n_seeds;
  const CompareReport report = run_compare(config);
  save_json(to_json(report), with_suffix(a.out, ".json"));
  const std::string csv = compare_csv(report);
  save_text(csv, with_suffix(a.out, ".csv"));
  std::cout << "synthetic users, " << config.n_seeds << " seeds\n" << csv;
}

// ------------------------------------------------------------------- serve

struct ServeArgs {
  std::string plan;
  std::string images;
  std::string mode = "mouse";
  double duration = 0.0;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string sessions_dir = "sessions";
  std::vector<std::string> session_ids;
  int page_size = 20;
  std::string query_text;
};

ServiceServer* g_server = nullptr;

void run_serve(const ServeArgs& a) {
  const RsvpPlan plan = load_plan(a.plan);
  SessionSpec base;
  base.mode = parse_mode(a.mode);
  base.plan = plan;
  base.duration_s = a.duration > 0.0 ? a.duration : static_cast<double>(kImagesPerQuery) / plan.rate_hz;
  base.page_size = a.page_size;
  const fs::path manifest_path = fs::path(a.images) / "manifest.json";
  if (fs::exists(manifest_path)) {
    const ImageManifest m = image_manifest_from_json(load_json(manifest_path));
    base.query_text = m.query_text;
    base.example_image_ids = m.example_image_ids;
  }
  if (!a.query_text.empty()) base.query_text = a.query_text;

  AnnotationService service(a.images, a.sessions_dir);
  const std::vector<std::string> ids = a.session_ids.empty() ? std::vector<std::string>{"s1"} : a.session_ids;
  for (const auto& id : ids) {
    SessionSpec spec = base;
    spec.session_id = id;
    service.add_session(spec);
  }
  ServiceServer server(service);
  const int port = server.bind(a.host, a.port);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cout << "serving " << ids.size() << " " << a.mode << " session(s) on http://" << a.host << ":" << port
            << " (" << base.duration_s << " s budget)" << std::endl;
  server.listen();
  g_server = nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG relevance-feedback retrieval on synthetic RSVP sessions"};
  app.require_subcommand(1);

  GenPlanArgs gp;
  auto* gen_plan = app.add_subcommand("gen-plan", "Build an RSVP plan (5 blocks x 200 images) from a labeled manifest");
  gen_plan->add_option("--manifest", gp.manifest, "manifest.json or feature truth JSON")->required();
  gen_plan->add_option("--rate", gp.rate, "presentation rate in Hz (5 or 10)")->check(CLI::IsMember({5, 10}));
  gen_plan->add_option("--seed", gp.seed, "shuffle seed");
  gen_plan->add_option("--session-seed", gp.session_seed, "seed for picking 50/950 images from larger sets");
  gen_plan->add_option("--query-id", gp.query_id);
  gen_plan->add_option("--gap", gp.gap, "rest between blocks, seconds");
  gen_plan->add_option("--out", gp.out, "plan JSON path")->required();

  GenDatasetArgs gd;
  auto* gen_dataset = app.add_subcommand("gen-dataset", "Write a synthetic PNG query set and manifest");
  gen_dataset->add_option("--n", gd.n);
  gen_dataset->add_option("--targets", gd.n_targets);
  gen_dataset->add_option("--seed", gd.seed);
  gen_dataset->add_option("--width", gd.options.width);
  gen_dataset->add_option("--height", gd.options.height);
  gen_dataset->add_option("--query-id", gd.options.query_id);
  gen_dataset->add_option("--query-text", gd.options.query_text);
  gen_dataset->add_option("--out", gd.out, "output directory")->required();

  GenFeaturesArgs gf;
  auto* gen_features = app.add_subcommand("gen-features", "Write a synthetic image-feature matrix and ground truth");
  gen_features->add_option("--n", gf.options.n);
  gen_features->add_option("--d", gf.options.d);
  gen_features->add_option("--relevant", gf.options.n_relevant);
  gen_features->add_option("--separation", gf.options.separation);
  gen_features->add_option("--noise-sd", gf.options.noise_sd);
  gen_features->add_option("--clusters", gf.options.n_clusters);
  gen_features->add_option("--prefix", gf.options.id_prefix, "image id prefix");
  gen_features->add_option("--seed", gf.seed);
  gen_features->add_option("--out", gf.out, "output base path (<out>.feat.json, <out>.truth.json)")->required();

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Simulate the EEG recording of one RSVP session");
  simulate->add_option("--profile", sa.profile, "profile JSON, or 'expert' / 'novice'")->required();
  simulate->add_option("--plan", sa.plan)->required();
  simulate->add_option("--pre-roll", sa.options.pre_roll_s);
  simulate->add_option("--post-roll", sa.options.post_roll_s);
  simulate->add_option("--out", sa.out, "output base path")->required();

  PreprocessArgs pa;
  auto* preprocess = app.add_subcommand("preprocess", "Recording + markers -> epoch feature matrix");
  preprocess->add_option("--rec", pa.rec, "recording base path")->required();
  preprocess->add_option("--markers", pa.markers)->required();
  preprocess->add_option("--config", pa.config, "pipeline config JSON");
  preprocess->add_flag("--truncated", pa.truncated, "clip the feature windows to the nominal 200 ms - 1 s span");
  preprocess->add_option("--out", pa.out, "output base path")->required();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval-eeg", "Leave-one-query-out SVM scoring of three sessions");
  eval->add_option("--queries", ea.queries, "three comma-separated base paths (<base>.feat.*, <base>.markers.jsonl)")
      ->required();
  eval->add_option("--c", ea.c, "SVM C");
  eval->add_option("--seed", ea.seed, "SVM coordinate-order seed");
  eval->add_option("--out", ea.out, "report base path")->required();

  RankArgs ra;
  auto* rank = app.add_subcommand("rank", "Rank a session's images from EEG scores or a mouse log");
  rank->add_option("--from", ra.from)->required()->check(CLI::IsMember({"eeg", "mouse"}));
  rank->add_option("--plan", ra.plan, "plan JSON: display order and ground truth")->required();
  rank->add_option("--scores", ra.scores, "ranking CSV with scores (eeg)");
  rank->add_option("--log", ra.log, "annotation log JSON (mouse)");
  rank->add_option("--out", ra.out, "ranking CSV")->required();
  rank->add_option("--report", ra.report, "AP report JSON");
  rank->add_option("--labels-out", ra.labels_out, "write feedback labels JSON");
  rank->add_option("--n-pos", ra.n_pos);
  rank->add_option("--n-neg", ra.n_neg);

  FeedbackArgs fa;
  auto* feedback = app.add_subcommand("feedback", "Re-rank a feature collection from feedback labels");
  feedback->add_option("--labels", fa.labels)->required();
  feedback->add_option("--features", fa.features, "feature matrix base path")->required();
  feedback->add_option("--truth", fa.truth, "ground truth JSON, enables AP");
  feedback->add_option("--out", fa.out, "ranking CSV")->required();
  feedback->add_option("--report", fa.report);
  feedback->add_option("--c", fa.c);
  feedback->add_option("--seed", fa.seed);

  CompareArgs ca;
  auto* compare = app.add_subcommand("compare", "Profile x rate x modality grid with Welch t-tests");
  compare->add_option("--config", ca.config)->required();
  compare->add_option("--seeds", ca.n_seeds, "override n_seeds");
  compare->add_option("--out", ca.out, "report base path (<out>.json, <out>.csv)")->required();

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP service for the annotation interface");
  serve_cmd->add_option("--plan", sv.plan)->required();
  serve_cmd->add_option("--images", sv.images, "directory with <id>.png and manifest.json")->required();
  serve_cmd->add_option("--mode", sv.mode)->check(CLI::IsMember({"mouse", "rsvp"}));
  serve_cmd->add_option("--duration", sv.duration, "time budget in seconds (default 1000 / rate)");
  serve_cmd->add_option("--host", sv.host);
  serve_cmd->add_option("--port", sv.port);
  serve_cmd->add_option("--sessions-dir", sv.sessions_dir);
  serve_cmd->add_option("--session", sv.session_ids, "session id (repeatable, default s1)");
  serve_cmd->add_option("--page-size", sv.page_size);
  serve_cmd->add_option("--query-text", sv.query_text);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_plan) run_gen_plan(gp);
    if (*gen_dataset) run_gen_dataset(gd);
    if (*gen_features) run_gen_features(gf);
    if (*simulate) run_simulate(sa);
    if (*preprocess) run_preprocess(pa);
    if (*eval) run_eval_eeg(ea);
    if (*rank) run_rank(ra);
    if (*feedback) run_feedback(fa);
    if (*compare) run_compare_cmd(ca);
    if (*serve_cmd) run_serve(sv);
  } catch (const std::exception& e) {
    std::cerr << "eegrf: " << e.what() << "\n";
    return static_cast<int>(exit_code_for(e));
  }
  return 0;
}
