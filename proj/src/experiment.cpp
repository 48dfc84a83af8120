#include "eegrf/experiment.hpp"

#include <cmath>
#include <sstream>

#include "eegrf/errors.hpp"
#include "eegrf/planner.hpp"
#include "eegrf/random.hpp"
#include "eegrf/retrieval.hpp"

namespace eegrf {

namespace {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

nlohmann::json to_json(const FeatureSetOptions& o) {
  return nlohmann::json{{"n", o.n},
                        {"d", o.d},
                        {"n_relevant", o.n_relevant},
                        {"separation", o.separation},
                        {"noise_sd", o.noise_sd},
                        {"n_clusters", o.n_clusters},
                        {"centre_sd", o.centre_sd},
                        {"id_prefix", o.id_prefix}};
}

FeatureSetOptions feature_set_options_from_json(const nlohmann::json& j) {
  FeatureSetOptions o;
  o.n = get_or(j, "n", o.n);
  o.d = get_or(j, "d", o.d);
  o.n_relevant = get_or(j, "n_relevant", o.n_relevant);
  o.separation = get_or(j, "separation", o.separation);
  o.noise_sd = get_or(j, "noise_sd", o.noise_sd);
  o.n_clusters = get_or(j, "n_clusters", o.n_clusters);
  o.centre_sd = get_or(j, "centre_sd", o.centre_sd);
  o.id_prefix = get_or(j, "id_prefix", o.id_prefix);
  return o;
}

nlohmann::json to_json(const SvmOptions& o) {
  return nlohmann::json{
      {"c", o.c}, {"tolerance", o.tolerance}, {"max_epochs", o.max_epochs}, {"seed", o.seed}, {"shrinking", o.shrinking}};
}

SvmOptions svm_options_from_json(const nlohmann::json& j) {
  SvmOptions o;
  o.c = get_or(j, "c", o.c);
  o.tolerance = get_or(j, "tolerance", o.tolerance);
  o.max_epochs = get_or(j, "max_epochs", o.max_epochs);
  o.seed = get_or(j, "seed", o.seed);
  o.shrinking = get_or(j, "shrinking", o.shrinking);
  return o;
}

std::vector<bool> target_flags(const std::vector<std::string>& ids, const std::unordered_set<std::string>& targets) {
  std::vector<bool> flags;
  flags.reserve(ids.size());
  for (const auto& id : ids) flags.push_back(targets.contains(id));
  return flags;
}

std::optional<double> mean_of(const std::vector<QueryOutcome>& qs, std::optional<double> QueryOutcome::*field) {
  std::vector<double> v;
  for (const auto& q : qs) {
    if (!(q.*field)) return std::nullopt;
    v.push_back(*(q.*field));
  }
  return mean_ap(v);
}

}  // namespace

nlohmann::json to_json(const AnnotatorPolicy& p) {
  return nlohmann::json{{"images_per_s", p.images_per_s}, {"detection_p", p.detection_p}, {"page_size", p.page_size}};
}

AnnotatorPolicy annotator_policy_from_json(const nlohmann::json& j) {
  AnnotatorPolicy p;
  p.images_per_s = get_or(j, "images_per_s", p.images_per_s);
  p.detection_p = get_or(j, "detection_p", p.detection_p);
  p.page_size = get_or(j, "page_size", p.page_size);
  if (!(p.images_per_s > 0.0) || p.detection_p < 0.0 || p.detection_p > 1.0 || p.page_size < 1) {
    throw PreconditionError("annotator: need images_per_s > 0, detection_p in [0, 1], page_size >= 1");
  }
  return p;
}

std::vector<std::vector<std::string>> paginate(std::span<const std::string> display_order, int page_size) {
  if (page_size < 1) throw PreconditionError("page size must be at least 1");
  std::vector<std::vector<std::string>> pages;
  for (std::size_t i = 0; i < display_order.size(); i += static_cast<std::size_t>(page_size)) {
    const std::size_t end = std::min(display_order.size(), i + static_cast<std::size_t>(page_size));
    pages.emplace_back(display_order.begin() + static_cast<std::ptrdiff_t>(i),
                       display_order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return pages;
}

AnnotationLog simulate_annotator(std::span<const std::string> display_order, const std::vector<bool>& is_target,
                                 const AnnotatorPolicy& policy, double duration_s, std::uint64_t seed,
                                 const std::string& session_id) {
  if (display_order.size() != is_target.size()) throw PreconditionError("annotator: label count mismatch");
  if (!(policy.images_per_s > 0.0)) throw PreconditionError("annotator: images_per_s must be positive");
  AnnotationLog log;
  log.session_id = session_id;
  log.mode = AnnotationMode::kMouse;
  log.duration_s = duration_s;
  const auto budget_ms = static_cast<std::int64_t>(std::llround(duration_s * 1000.0));
  Xoshiro256 rng(seed);
  const auto pages = paginate(display_order, policy.page_size);

  std::size_t scanned = 0;
  std::int64_t t_ms = 0;
  for (std::size_t p = 0; p < pages.size() && t_ms <= budget_ms; ++p) {
    if (p > 0) log.events.push_back({t_ms, EventKind::kNext, std::nullopt, static_cast<int>(p) - 1, {}, {}});
    for (const auto& id : pages[p]) log.events.push_back({t_ms, EventKind::kShow, id, static_cast<int>(p), {}, {}});
    for (const auto& id : pages[p]) {
      t_ms = std::llround(static_cast<double>(scanned + 1) * 1000.0 / policy.images_per_s);
      if (t_ms > budget_ms) break;
      const bool detected = is_target[scanned] && rng.uniform() < policy.detection_p;
      if (detected) log.events.push_back({t_ms, EventKind::kClick, id, static_cast<int>(p), {}, {}});
      ++scanned;
    }
  }
  std::int64_t seq = 0;
  for (auto& e : log.events) e.seq = seq++;
  return log;
}

nlohmann::json to_json(const ExperimentSetup& s) {
  return nlohmann::json{{"feature_set", to_json(s.feature_set)},
                        {"dataset_seed", s.dataset_seed},
                        {"inter_block_gap_s", s.inter_block_gap_s},
                        {"pipeline", to_json(s.pipeline)},
                        {"svm", to_json(s.svm)},
                        {"annotator", to_json(s.annotator)},
                        {"n_pos", s.n_pos},
                        {"n_neg", s.n_neg}};
}

ExperimentSetup experiment_setup_from_json(const nlohmann::json& j) {
  ExperimentSetup s;
  if (j.contains("feature_set")) s.feature_set = feature_set_options_from_json(j.at("feature_set"));
  s.dataset_seed = get_or(j, "dataset_seed", s.dataset_seed);
  s.inter_block_gap_s = get_or(j, "inter_block_gap_s", s.inter_block_gap_s);
  if (j.contains("pipeline")) s.pipeline = pipeline_config_from_json(j.at("pipeline"));
  if (j.contains("svm")) s.svm = svm_options_from_json(j.at("svm"));
  if (j.contains("annotator")) s.annotator = annotator_policy_from_json(j.at("annotator"));
  s.n_pos = get_or(j, "n_pos", s.n_pos);
  s.n_neg = get_or(j, "n_neg", s.n_neg);
  return s;
}

std::vector<QueryCollection> make_collections(const ExperimentSetup& setup) {
  std::vector<QueryCollection> queries;
  for (std::size_t q = 0; q < 3; ++q) {
    QueryCollection c;
    c.query_id = "q" + std::to_string(q + 1);
    FeatureSetOptions o = setup.feature_set;
    o.id_prefix = c.query_id + "_" + o.id_prefix;
    const std::uint64_t qseed = derive_seed(setup.dataset_seed, q + 1);
    c.set = gen_feature_set(o, derive_seed(qseed, 1));
    c.session = select_session_images(c.set.matrix.image_ids, c.set.relevant, derive_seed(qseed, 2));
    for (std::size_t i = 0; i < c.set.relevant.size(); ++i) {
      if (c.set.relevant[i]) c.relevant.insert(c.set.matrix.image_ids[i]);
    }
    c.session_targets.insert(c.session.targets.begin(), c.session.targets.end());
    queries.push_back(std::move(c));
  }
  return queries;
}

RsvpPlan session_plan(const QueryCollection& query, std::size_t query_index, int rate_hz, std::uint64_t seed,
                      double inter_block_gap_s) {
  return build_plan(query.session.targets, query.session.distractors, rate_hz,
                    derive_seed(seed, 0x706c616eULL + query_index), query.query_id, inter_block_gap_s);
}

QueryOutcome feedback_outcome(const QueryCollection& query, const FeedbackLabels& labels, const SvmOptions& svm) {
  QueryOutcome out;
  out.query_id = query.query_id;
  try {
    out.ranking = feedback_rank(labels, query.set.matrix, query.query_id, svm);
    out.feedback_trained = true;
  } catch (const TrainingError&) {
    out.ranking.query_id = query.query_id;
    for (const auto& id : query.set.matrix.image_ids) out.ranking.entries.push_back({id, std::nullopt});
  }
  out.ap = average_precision(out.ranking, query.relevant);
  return out;
}

ArmOutcome run_eeg_arm(const std::vector<QueryCollection>& queries, const UserProfile& profile, int rate_hz,
                       std::uint64_t seed, const ExperimentSetup& setup, bool with_feedback) {
  if (queries.size() != 3) throw PreconditionError("run_eeg_arm: expected 3 queries");
  UserProfile user = profile;
  user.seed = derive_seed(profile.seed, seed);
  std::vector<RsvpPlan> plans;
  std::vector<LabeledFeatures> features;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    plans.push_back(session_plan(queries[q], q, rate_hz, seed, setup.inter_block_gap_s));
    const SimulatedSession sim = simulate_recording(plans.back(), user);
    features.push_back(preprocess_session(sim.recording, sim.markers, setup.pipeline));
  }
  SvmOptions svm = setup.svm;
  svm.seed = derive_seed(setup.svm.seed, seed);
  const auto scores = cross_query_scores(features, svm);

  ArmOutcome arm;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    QueryOutcome out;
    out.query_id = queries[q].query_id;
    std::vector<std::string> display;
    for (const auto& item : plans[q].presentation_order()) display.push_back(item.image_id);
    out.ranking = ranking_from_scores(out.query_id, features[q].matrix.image_ids, scores[q], display);
    out.auc = roc_auc(scores[q], features[q].is_target);
    out.roc = roc_curve(scores[q], features[q].is_target);
    out.ap = average_precision(out.ranking, queries[q].session_targets);
    if (with_feedback) {
      const FeedbackLabels labels = select_feedback_labels_eeg(out.ranking, static_cast<std::size_t>(setup.n_pos),
                                                               static_cast<std::size_t>(setup.n_neg));
      const QueryOutcome fb = feedback_outcome(queries[q], labels, svm);
      out.feedback_ap = fb.ap;
      out.feedback_trained = fb.feedback_trained;
    }
    arm.queries.push_back(std::move(out));
  }
  std::vector<double> aps;
  for (const auto& q : arm.queries) aps.push_back(q.ap);
  arm.map = mean_ap(aps);
  arm.mean_auc = mean_of(arm.queries, &QueryOutcome::auc);
  arm.feedback_map = mean_of(arm.queries, &QueryOutcome::feedback_ap);
  return arm;
}

ArmOutcome run_mouse_arm(const std::vector<QueryCollection>& queries, int rate_hz, std::uint64_t seed,
                         const ExperimentSetup& setup, bool with_feedback, std::optional<double> duration_s,
                         std::uint64_t annotator_stream) {
  if (queries.size() != 3) throw PreconditionError("run_mouse_arm: expected 3 queries");
  const double budget = duration_s.value_or(static_cast<double>(kImagesPerQuery) / rate_hz);
  ArmOutcome arm;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const RsvpPlan plan = session_plan(queries[q], q, rate_hz, seed, setup.inter_block_gap_s);
    std::vector<std::string> display;
    for (const auto& item : plan.presentation_order()) display.push_back(item.image_id);
    const AnnotationLog log =
        simulate_annotator(display, target_flags(display, queries[q].session_targets), setup.annotator, budget,
                           derive_seed(derive_seed(seed, 0x6d6f757365ULL + q), annotator_stream),
                           queries[q].query_id + "-mouse");
    const AnnotationSets sets = annotation_sets(log, display);
    QueryOutcome out;
    out.query_id = queries[q].query_id;
    out.ranking = ranking_from_annotations(sets, out.query_id);
    out.ap = average_precision(out.ranking, queries[q].session_targets);
    if (with_feedback) {
      FeedbackLabels labels{sets.p_a, sets.n_a};
      SvmOptions svm = setup.svm;
      svm.seed = derive_seed(setup.svm.seed, seed);
      const QueryOutcome fb = feedback_outcome(queries[q], labels, svm);
      out.feedback_ap = fb.ap;
      out.feedback_trained = fb.feedback_trained;
    }
    arm.queries.push_back(std::move(out));
  }
  std::vector<double> aps;
  for (const auto& q : arm.queries) aps.push_back(q.ap);
  arm.map = mean_ap(aps);
  arm.feedback_map = mean_of(arm.queries, &QueryOutcome::feedback_ap);
  return arm;
}

CompareConfig compare_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  CompareConfig c;
  c.n_seeds = get_or(j, "n_seeds", c.n_seeds);
  c.seed_base = get_or(j, "seed_base", c.seed_base);
  c.rates = get_or(j, "rates", c.rates);
  c.modalities = get_or(j, "modalities", c.modalities);
  c.feedback = get_or(j, "feedback", c.feedback);
  if (j.contains("setup")) c.setup = experiment_setup_from_json(j.at("setup"));
  if (c.n_seeds < 1) throw PreconditionError("compare: n_seeds must be at least 1");
  for (int r : c.rates) {
    if (r != 5 && r != 10) throw PreconditionError("compare: rate must be 5 or 10, got " + std::to_string(r));
  }
  for (const auto& m : c.modalities) {
    if (m != "eeg" && m != "mouse") throw PreconditionError("compare: unknown modality '" + m + "'");
  }
  const nlohmann::json profiles = j.value("profiles", nlohmann::json::array({"expert", "novice"}));
  for (const auto& p : profiles) {
    if (p.is_object()) {
      c.profiles.push_back(user_profile_from_json(p));
    } else if (p == "expert") {
      c.profiles.push_back(expert_profile());
    } else if (p == "novice") {
      c.profiles.push_back(novice_profile());
    } else if (p.is_string()) {
      c.profiles.push_back(load_user_profile(base_dir / p.get<std::string>()));
    } else {
      throw FormatError("compare: profiles entries must be names, paths or objects");
    }
  }
  if (c.profiles.empty()) throw PreconditionError("compare: no profiles");
  return c;
}

CompareReport run_compare(const CompareConfig& config) {
  CompareReport report;
  report.config = config;
  const auto queries = make_collections(config.setup);
  for (std::size_t p = 0; p < config.profiles.size(); ++p) {
    const UserProfile& profile = config.profiles[p];
    for (int rate : config.rates) {
      for (const auto& modality : config.modalities) {
        CompareCell cell;
        cell.profile = profile.name;
        cell.rate_hz = rate;
        cell.modality = modality;
        for (int s = 0; s < config.n_seeds; ++s) {
          const std::uint64_t seed = config.seed_base + static_cast<std::uint64_t>(s);
          const ArmOutcome arm = modality == "eeg"
                                     ? run_eeg_arm(queries, profile, rate, seed, config.setup, config.feedback)
                                     : run_mouse_arm(queries, rate, seed, config.setup, config.feedback, std::nullopt,
                                                     hash_string(profile.name));
          cell.map.push_back(arm.map);
          if (arm.mean_auc) cell.mean_auc.push_back(*arm.mean_auc);
          if (arm.feedback_map) cell.feedback_map.push_back(*arm.feedback_map);
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

  const auto find = [&](const std::string& profile, int rate, const std::string& modality) -> const CompareCell* {
    for (const auto& c : report.cells) {
      if (c.profile == profile && c.rate_hz == rate && c.modality == modality) return &c;
    }
    return nullptr;
  };
  const auto name = [](const CompareCell& c) {
    return c.profile + "/" + std::to_string(c.rate_hz) + "Hz/" + c.modality;
  };
  const auto add_test = [&](const std::string& label, const std::string& metric, const CompareCell& a,
                            const CompareCell& b, const std::vector<double>& va, const std::vector<double>& vb) {
    CompareTest t{label, metric, name(a), name(b), std::nullopt, {}};
    if (va.size() < 2 || vb.size() < 2) {
      t.note = "fewer than 2 values per group";
    } else {
      try {
        t.result = welch_t_test(va, vb);
      } catch (const PreconditionError& e) {
        t.note = e.what();
      }
    }
    report.tests.push_back(std::move(t));
  };

  for (int rate : config.rates) {
    for (const auto& modality : config.modalities) {
      for (std::size_t a = 0; a < config.profiles.size(); ++a) {
        for (std::size_t b = a + 1; b < config.profiles.size(); ++b) {
          const auto* ca = find(config.profiles[a].name, rate, modality);
          const auto* cb = find(config.profiles[b].name, rate, modality);
          if (!ca || !cb) continue;
          add_test("profile", "map", *ca, *cb, ca->map, cb->map);
          if (modality == "eeg") add_test("profile", "mean_auc", *ca, *cb, ca->mean_auc, cb->mean_auc);
          if (config.feedback) add_test("profile", "feedback_map", *ca, *cb, ca->feedback_map, cb->feedback_map);
        }
      }
    }
  }
  for (const auto& profile : config.profiles) {
    for (const auto& modality : config.modalities) {
      for (std::size_t a = 0; a < config.rates.size(); ++a) {
        for (std::size_t b = a + 1; b < config.rates.size(); ++b) {
          const auto* ca = find(profile.name, config.rates[a], modality);
          const auto* cb = find(profile.name, config.rates[b], modality);
          if (ca && cb) add_test("rate", "map", *ca, *cb, ca->map, cb->map);
        }
      }
    }
    for (int rate : config.rates) {
      const auto* ce = find(profile.name, rate, "eeg");
      const auto* cm = find(profile.name, rate, "mouse");
      if (ce && cm) add_test("modality", "map", *ce, *cm, ce->map, cm->map);
    }
  }
  return report;
}

nlohmann::json to_json(const CompareReport& report) {
  nlohmann::json profiles = nlohmann::json::array();
  for (const auto& p : report.config.profiles) profiles.push_back(to_json(p));
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json jc{{"profile", c.profile},
                      {"rate_hz", c.rate_hz},
                      {"modality", c.modality},
                      {"duration_s", kImagesPerQuery / c.rate_hz},
                      {"map", c.map},
                      {"map_mean", mean(c.map)}};
    if (!c.mean_auc.empty()) {
      jc["mean_auc"] = c.mean_auc;
      jc["mean_auc_mean"] = mean(c.mean_auc);
    }
    if (!c.feedback_map.empty()) {
      jc["feedback_map"] = c.feedback_map;
      jc["feedback_map_mean"] = mean(c.feedback_map);
    }
    cells.push_back(std::move(jc));
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : report.tests) {
    nlohmann::json jt{{"comparison", t.label}, {"metric", t.metric}, {"group_a", t.group_a}, {"group_b", t.group_b}};
    if (t.result) {
      jt["t"] = t.result->t;
      jt["df"] = t.result->df;
      jt["p"] = t.result->p;
    } else {
      jt["t"] = nullptr;
      jt["p"] = nullptr;
      jt["note"] = t.note;
    }
    tests.push_back(std::move(jt));
  }
  return nlohmann::json{{"synthetic", true},
                        {"n_seeds", report.config.n_seeds},
                        {"seed_base", report.config.seed_base},
                        {"profiles", profiles},
                        {"setup", to_json(report.config.setup)},
                        {"cells", cells},
                        {"tests", tests}};
}

std::string compare_csv(const CompareReport& report) {
  const auto sd = [](const std::vector<double>& v) { return v.size() >= 2 ? std::sqrt(sample_variance(v)) : 0.0; };
  std::ostringstream out;
  out << "profile,rate_hz,modality,duration_s,n_seeds,map_mean,map_sd,mean_auc,feedback_map_mean,feedback_map_sd\n";
  for (const auto& c : report.cells) {
    out << c.profile << ',' << c.rate_hz << ',' << c.modality << ',' << kImagesPerQuery / c.rate_hz << ','
        << c.map.size() << ',' << format_double(mean(c.map)) << ',' << format_double(sd(c.map)) << ',';
    if (!c.mean_auc.empty()) out << format_double(mean(c.mean_auc));
    out << ',';
    if (!c.feedback_map.empty()) out << format_double(mean(c.feedback_map)) << ',' << format_double(sd(c.feedback_map));
    else out << ',';
    out << '\n';
  }
  return out.str();
}

}  // namespace eegrf
