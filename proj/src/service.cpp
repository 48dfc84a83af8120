#include "eegrf/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <regex>

#include "httplib.h"

#include "eegrf/errors.hpp"
#include "eegrf/experiment.hpp"
#include "eegrf/metrics.hpp"
#include "eegrf/retrieval.hpp"

namespace eegrf {

namespace {

using json = nlohmann::json;

HttpResponse json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

bool safe_id(const std::string& id) {
  return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  }) && id.find("..") == std::string::npos;
}

std::int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

AnnotationService::AnnotationService(std::filesystem::path images_dir, std::filesystem::path sessions_dir)
    : images_dir_(std::move(images_dir)), sessions_dir_(std::move(sessions_dir)) {}

void AnnotationService::add_session(const SessionSpec& spec) {
  validate_plan(spec.plan);
  if (!safe_id(spec.session_id)) throw PreconditionError("invalid session id '" + spec.session_id + "'");
  if (!(spec.duration_s > 0.0)) throw PreconditionError("session duration must be positive");
  if (spec.page_size < 1) throw PreconditionError("page size must be at least 1");
  auto s = std::make_unique<Session>();
  s->spec = spec;
  for (const auto& item : spec.plan.presentation_order()) {
    s->display_order.push_back(item.image_id);
    s->image_ids.insert(item.image_id);
    if (item.is_target) s->targets.insert(item.image_id);
  }
  s->log.session_id = spec.session_id;
  s->log.mode = spec.mode;
  s->log.rate_hz = spec.plan.rate_hz;
  s->log.duration_s = spec.duration_s;
  std::lock_guard lock(sessions_mu_);
  if (!sessions_.emplace(spec.session_id, std::move(s)).second) {
    throw PreconditionError("session '" + spec.session_id + "' already exists");
  }
}

AnnotationService::Session* AnnotationService::find(const std::string& session_id) const {
  std::lock_guard lock(sessions_mu_);
  const auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second.get();
}

std::optional<AnnotationLog> AnnotationService::session_log(const std::string& session_id) const {
  const Session* s = find(session_id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mu);
  return s->log;
}

HttpResponse AnnotationService::handle(const std::string& method, const std::string& path, const std::string& body,
                                       std::int64_t arrival_ms) {
  static const std::regex session_route(R"(^/api/sessions/([^/]+)/(manifest|events|finish)$)");
  static const std::regex image_route(R"(^/api/images/([^/]+)$)");
  std::smatch m;
  try {
    if (std::regex_match(path, m, image_route)) {
      if (method != "GET") return error_response(405, "method not allowed");
      return image(m[1]);
    }
    if (!std::regex_match(path, m, session_route)) return error_response(404, "no route for " + path);
    const std::string action = m[2];
    Session* s = find(m[1]);
    if (!s) return error_response(404, "unknown session '" + std::string(m[1]) + "'");
    if (action == "manifest") {
      if (method != "GET") return error_response(405, "method not allowed");
      return manifest(*s);
    }
    if (method != "POST") return error_response(405, "method not allowed");
    std::lock_guard lock(s->mu);
    if (action == "events") return post_events(*s, body, arrival_ms < 0 ? wall_clock_ms() : arrival_ms);
    return finish(*s);
  } catch (const Error& e) {
    return error_response(500, e.what());
  }
}

HttpResponse AnnotationService::manifest(const Session& s) const {
  const SessionSpec& spec = s.spec;
  json j{{"session_id", spec.session_id},
         {"mode", to_string(spec.mode)},
         {"rate_hz", spec.plan.rate_hz},
         {"duration_s", spec.duration_s},
         {"query_text", spec.query_text},
         {"example_image_ids", spec.example_image_ids}};
  if (spec.mode == AnnotationMode::kMouse) {
    j["page_size"] = spec.page_size;
    j["pages"] = paginate(s.display_order, spec.page_size);
  } else {
    json blocks = json::array();
    for (const auto& block : spec.plan.blocks) {
      json ids = json::array();
      for (const auto& item : block) ids.push_back(item.image_id);
      blocks.push_back(std::move(ids));
    }
    j["stimulus_order"] = std::move(blocks);
    j["inter_block_gap_s"] = spec.plan.inter_block_gap_s;
  }
  return json_response(200, j);
}

HttpResponse AnnotationService::image(const std::string& image_id) const {
  if (!safe_id(image_id)) return error_response(404, "unknown image");
  const std::filesystem::path p = images_dir_ / (image_id + ".png");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) return error_response(404, "unknown image '" + image_id + "'");
  return {200, "image/png", load_text(p)};
}

HttpResponse AnnotationService::post_events(Session& s, const std::string& body, std::int64_t arrival_ms) {
  if (s.finished) return error_response(409, "session '" + s.spec.session_id + "' is finished");
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_response(422, std::string("malformed JSON: ") + e.what());
  }
  json items;
  if (j.is_object() && j.contains("events")) {
    items = j["events"];
  } else if (j.is_array()) {
    items = j;
  } else if (j.is_object()) {
    items = json::array({j});
  }
  if (!items.is_array()) return error_response(422, "expected an event, an array of events or {\"events\": [...]}");

  // Validate the whole batch before touching the log.
  std::vector<AnnotationEvent> parsed;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "event " + std::to_string(i) + ": ";
    AnnotationEvent e;
    try {
      if (!items[i].is_object()) throw FormatError("not an object");
      if (!items[i].contains("seq")) throw FormatError("missing seq");
      e = event_from_json(items[i]);
    } catch (const FormatError& err) {
      return error_response(422, where + err.what());
    }
    if (*e.seq < 0 || e.t_ms < 0) return error_response(422, where + "seq and t_ms must be non-negative");
    const bool mouse = s.spec.mode == AnnotationMode::kMouse;
    const bool kind_ok = e.kind == EventKind::kShow || (mouse ? e.kind != EventKind::kButton
                                                               : e.kind == EventKind::kButton);
    if (!kind_ok) {
      return error_response(422, where + "'" + to_string(e.kind) + "' events are not valid in " +
                                     to_string(s.spec.mode) + " sessions");
    }
    if ((e.kind == EventKind::kShow || e.kind == EventKind::kClick) && !e.image_id) {
      return error_response(422, where + to_string(e.kind) + " needs an image_id");
    }
    if (e.image_id && !s.image_ids.contains(*e.image_id)) {
      return error_response(422, where + "image '" + *e.image_id + "' is not part of this session");
    }
    e.arrival_ms = arrival_ms;
    parsed.push_back(std::move(e));
  }

  const auto budget_ms = static_cast<std::int64_t>(std::llround(s.spec.duration_s * 1000.0));
  int accepted = 0;
  int duplicates = 0;
  int late = 0;
  for (auto& e : parsed) {
    if (!s.seen_seq.insert(*e.seq).second) {
      ++duplicates;
      continue;
    }
    ++accepted;
    if (e.t_ms > budget_ms) {
      ++late;
      s.log.late_events.push_back(std::move(e));
    } else {
      s.log.events.push_back(std::move(e));
    }
  }
  const auto by_time = [](const AnnotationEvent& a, const AnnotationEvent& b) {
    return std::make_pair(a.t_ms, *a.seq) < std::make_pair(b.t_ms, *b.seq);
  };
  std::sort(s.log.events.begin(), s.log.events.end(), by_time);
  std::sort(s.log.late_events.begin(), s.log.late_events.end(), by_time);
  return json_response(200, json{{"accepted", accepted},
                                 {"duplicates", duplicates},
                                 {"late", late},
                                 {"n_events", s.log.events.size() + s.log.late_events.size()}});
}

HttpResponse AnnotationService::finish(Session& s) {
  if (s.finished) return error_response(409, "session '" + s.spec.session_id + "' is already finished");
  json result{{"session_id", s.spec.session_id}};
  std::unordered_set<std::string> seen;
  int n_clicks = 0;
  for (const auto& e : s.log.events) {
    if (e.kind == EventKind::kShow) seen.insert(*e.image_id);
    if (e.kind == EventKind::kClick || e.kind == EventKind::kButton) ++n_clicks;
  }
  std::optional<Ranking> ranking;
  try {
    if (s.spec.mode == AnnotationMode::kMouse) {
      const AnnotationSets sets = annotation_sets(s.log, s.display_order);
      ranking = ranking_from_annotations(sets, s.spec.plan.query_id);
      result["ap"] = s.targets.empty() ? json(nullptr) : json(average_precision(*ranking, s.targets));
      result["n_positive"] = sets.p_a.size();
      result["n_negative"] = sets.n_a.size();
    } else {
      validate_log(s.log);
      result["ap"] = nullptr;
    }
  } catch (const LogConsistencyError& e) {
    return error_response(422, e.what());
  }
  result["n_clicks"] = n_clicks;
  result["n_seen"] = seen.size();

  const std::filesystem::path log_path = sessions_dir_ / (s.spec.session_id + ".log.json");
  save_log(s.log, log_path);
  result["log_path"] = log_path.string();
  if (ranking) {
    const std::filesystem::path ranking_path = sessions_dir_ / (s.spec.session_id + ".ranking.csv");
    save_ranking(*ranking, ranking_path);
    result["ranking_path"] = ranking_path.string();
  }
  s.finished = true;
  return json_response(200, result);
}

ServiceServer::ServiceServer(AnnotationService& service) : server_(std::make_unique<httplib::Server>()) {
  const auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, r.content_type);
  };
  server_->Get(".*", forward);
  server_->Post(".*", forward);
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

ServiceServer::~ServiceServer() = default;

int ServiceServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ServiceServer::listen() { server_->listen_after_bind(); }

void ServiceServer::stop() { server_->stop(); }

}  // namespace eegrf
