#include "eegrf/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "eegrf/errors.hpp"

namespace eegrf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

fs::path with_suffix(const fs::path& base, const std::string& kind, const std::string& ext) {
  std::string s = base.string();
  for (const std::string& known : {"." + kind + ".json", "." + kind + ".f32"}) {
    if (s.size() > known.size() && s.compare(s.size() - known.size(), known.size(), known) == 0) {
      s.resize(s.size() - known.size());
      break;
    }
  }
  return fs::path(s + "." + kind + "." + ext);
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) {
    throw FormatError(where + ": missing field '" + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(where + ": invalid field '" + name + "': " + e.what());
  }
}

void write_f32_payload(std::span<const float> values, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      char bytes[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                       static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
      out.write(bytes, 4);
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<float> read_f32_payload(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  if (bytes % sizeof(float) != 0 || bytes / sizeof(float) != expected) {
    std::ostringstream msg;
    msg << path.string() << ": payload length mismatch: expected " << expected
        << " float32 values, found " << bytes / sizeof(float);
    if (bytes % sizeof(float) != 0) msg << " (+" << bytes % sizeof(float) << " stray bytes)";
    throw FormatError(msg.str());
  }
  std::vector<float> values(expected);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("read failed: " + path.string());
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) {
      auto b = std::bit_cast<std::uint32_t>(v);
      b = (b >> 24) | ((b >> 8) & 0xFF00u) | ((b << 8) & 0xFF0000u) | (b << 24);
      v = std::bit_cast<float>(b);
    }
  }
  return values;
}

void check_finite(std::span<const float> values, const fs::path& path) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError(path.string() + ": non-finite value at payload index " + std::to_string(i));
    }
  }
}

void check_header_common(const json& h, const std::string& where) {
  const int version = field<int>(h, "version", where);
  if (version != kFormatVersion) {
    throw FormatError(where + ": unsupported version " + std::to_string(version));
  }
}

}  // namespace

std::size_t LabeledFeatures::n_targets() const {
  return static_cast<std::size_t>(std::count(is_target.begin(), is_target.end(), true));
}

std::vector<PlanItem> RsvpPlan::presentation_order() const {
  std::vector<PlanItem> out;
  for (const auto& block : blocks) out.insert(out.end(), block.begin(), block.end());
  return out;
}

void validate_plan(const RsvpPlan& plan) {
  const std::string where = "plan '" + plan.query_id + "'";
  if (plan.rate_hz != 5 && plan.rate_hz != 10) {
    throw DataError(where + ": rate_hz must be 5 or 10, got " + std::to_string(plan.rate_hz));
  }
  if (!(plan.inter_block_gap_s >= 0.0) || !std::isfinite(plan.inter_block_gap_s)) {
    throw DataError(where + ": inter_block_gap_s must be a non-negative number");
  }
  if (plan.blocks.size() != static_cast<std::size_t>(kBlocksPerQuery)) {
    throw DataError(where + ": expected " + std::to_string(kBlocksPerQuery) + " blocks, found " +
                    std::to_string(plan.blocks.size()));
  }
  std::unordered_set<std::string> seen;
  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    const auto& block = plan.blocks[b];
    if (block.size() != static_cast<std::size_t>(kImagesPerBlock)) {
      throw DataError(where + ": block " + std::to_string(b) + " has " + std::to_string(block.size()) +
                      " images, expected " + std::to_string(kImagesPerBlock));
    }
    const auto targets = std::count_if(block.begin(), block.end(), [](const PlanItem& it) { return it.is_target; });
    if (targets != kTargetsPerBlock) {
      throw DataError(where + ": block " + std::to_string(b) + " has " + std::to_string(targets) +
                      " targets, expected " + std::to_string(kTargetsPerBlock));
    }
    for (const auto& item : block) {
      if (!seen.insert(item.image_id).second) {
        throw DataError(where + ": image '" + item.image_id + "' appears more than once");
      }
    }
  }
}

void validate_log(const AnnotationLog& log) {
  const std::string where = "annotation log '" + log.session_id + "'";
  const auto budget_ms = static_cast<std::int64_t>(std::llround(log.duration_s * 1000.0));
  std::unordered_set<std::string> shown;
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& e = log.events[i];
    const std::string at = where + ", event " + std::to_string(i);
    if (e.t_ms < prev) throw LogConsistencyError(at + ": t_ms decreases");
    if (e.t_ms < 0 || e.t_ms > budget_ms) {
      throw LogConsistencyError(at + ": t_ms " + std::to_string(e.t_ms) + " outside [0, " +
                                std::to_string(budget_ms) + "]");
    }
    prev = e.t_ms;
    switch (e.kind) {
      case EventKind::kShow:
        if (!e.image_id) throw LogConsistencyError(at + ": show event without image_id");
        shown.insert(*e.image_id);
        break;
      case EventKind::kClick:
        if (!e.image_id) throw LogConsistencyError(at + ": click event without image_id");
        [[fallthrough]];
      case EventKind::kButton:
        if (e.image_id && !shown.contains(*e.image_id)) {
          throw LogConsistencyError(at + ": " + to_string(e.kind) + " on image '" + *e.image_id +
                                    "' that was never shown");
        }
        break;
      case EventKind::kNext:
        break;
    }
  }
}

std::vector<std::string> Ranking::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.image_id);
  return out;
}

const char* to_string(AnnotationMode mode) { return mode == AnnotationMode::kMouse ? "mouse" : "rsvp"; }

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kShow: return "show";
    case EventKind::kClick: return "click";
    case EventKind::kNext: return "next";
    case EventKind::kButton: return "button";
  }
  return "?";
}

AnnotationMode parse_mode(const std::string& s) {
  if (s == "mouse") return AnnotationMode::kMouse;
  if (s == "rsvp") return AnnotationMode::kRsvp;
  throw FormatError("unknown annotation mode '" + s + "'");
}

EventKind parse_event_kind(const std::string& s) {
  if (s == "show") return EventKind::kShow;
  if (s == "click") return EventKind::kClick;
  if (s == "next") return EventKind::kNext;
  if (s == "button") return EventKind::kButton;
  throw FormatError("unknown event kind '" + s + "'");
}

json to_json(const EventMarker& m) {
  return json{{"onset_sample", m.onset_sample},
              {"image_id", m.image_id},
              {"is_target", m.is_target},
              {"block_index", m.block_index},
              {"query_id", m.query_id}};
}

EventMarker marker_from_json(const json& j) {
  const std::string where = "marker";
  EventMarker m;
  m.onset_sample = field<std::int64_t>(j, "onset_sample", where);
  m.image_id = field<std::string>(j, "image_id", where);
  m.is_target = field<bool>(j, "is_target", where);
  m.block_index = field<int>(j, "block_index", where);
  m.query_id = field<std::string>(j, "query_id", where);
  if (m.onset_sample < 0) throw DataError("marker '" + m.image_id + "': negative onset_sample");
  if (m.block_index < 0 || m.block_index >= kBlocksPerQuery) {
    throw DataError("marker '" + m.image_id + "': block_index out of range");
  }
  return m;
}

json to_json(const RsvpPlan& plan) {
  json blocks = json::array();
  for (const auto& block : plan.blocks) {
    json jb = json::array();
    for (const auto& item : block) jb.push_back({{"image_id", item.image_id}, {"is_target", item.is_target}});
    blocks.push_back(std::move(jb));
  }
  return json{{"query_id", plan.query_id},
              {"rate_hz", plan.rate_hz},
              {"inter_block_gap_s", plan.inter_block_gap_s},
              {"seed", plan.seed},
              {"blocks", std::move(blocks)}};
}

RsvpPlan plan_from_json(const json& j) {
  const std::string where = "plan";
  RsvpPlan plan;
  plan.query_id = field<std::string>(j, "query_id", where);
  plan.rate_hz = field<int>(j, "rate_hz", where);
  plan.inter_block_gap_s = field<double>(j, "inter_block_gap_s", where);
  plan.seed = field<std::uint64_t>(j, "seed", where);
  const auto& blocks = j.at("blocks");
  if (!blocks.is_array()) throw FormatError("plan: field 'blocks' must be an array");
  for (const auto& jb : blocks) {
    std::vector<PlanItem> block;
    for (const auto& ji : jb) {
      block.push_back({field<std::string>(ji, "image_id", "plan block item"),
                       field<bool>(ji, "is_target", "plan block item")});
    }
    plan.blocks.push_back(std::move(block));
  }
  return plan;
}

json to_json(const AnnotationEvent& e) {
  json j{{"t_ms", e.t_ms}, {"kind", to_string(e.kind)}};
  j["image_id"] = e.image_id ? json(*e.image_id) : json(nullptr);
  j["page"] = e.page ? json(*e.page) : json(nullptr);
  if (e.seq) j["seq"] = *e.seq;
  if (e.arrival_ms) j["arrival_ms"] = *e.arrival_ms;
  return j;
}

AnnotationEvent event_from_json(const json& j) {
  const std::string where = "event";
  AnnotationEvent e;
  e.t_ms = field<std::int64_t>(j, "t_ms", where);
  e.kind = parse_event_kind(field<std::string>(j, "kind", where));
  if (j.contains("image_id") && !j["image_id"].is_null()) e.image_id = field<std::string>(j, "image_id", where);
  if (j.contains("page") && !j["page"].is_null()) e.page = field<int>(j, "page", where);
  if (j.contains("seq") && !j["seq"].is_null()) e.seq = field<std::int64_t>(j, "seq", where);
  if (j.contains("arrival_ms") && !j["arrival_ms"].is_null()) {
    e.arrival_ms = field<std::int64_t>(j, "arrival_ms", where);
  }
  return e;
}

json to_json(const AnnotationLog& log) {
  json events = json::array();
  for (const auto& e : log.events) events.push_back(to_json(e));
  json late = json::array();
  for (const auto& e : log.late_events) late.push_back(to_json(e));
  return json{{"session_id", log.session_id},
              {"mode", to_string(log.mode)},
              {"rate_hz", log.rate_hz},
              {"duration_s", log.duration_s},
              {"events", std::move(events)},
              {"late_events", std::move(late)}};
}

AnnotationLog log_from_json(const json& j) {
  const std::string where = "annotation log";
  AnnotationLog log;
  log.session_id = field<std::string>(j, "session_id", where);
  log.mode = parse_mode(field<std::string>(j, "mode", where));
  log.rate_hz = field<int>(j, "rate_hz", where);
  log.duration_s = field<double>(j, "duration_s", where);
  for (const auto& je : field<json>(j, "events", where)) log.events.push_back(event_from_json(je));
  if (j.contains("late_events")) {
    for (const auto& je : j["late_events"]) log.late_events.push_back(event_from_json(je));
  }
  return log;
}

json to_json(const FeedbackLabels& labels) {
  return json{{"positives", labels.positives}, {"negatives", labels.negatives}};
}

FeedbackLabels labels_from_json(const json& j) {
  return {field<std::vector<std::string>>(j, "positives", "labels"),
          field<std::vector<std::string>>(j, "negatives", "labels")};
}

void save_recording(const RawRecording& rec, const fs::path& base) {
  if (rec.channel_labels.size() != rec.n_channels()) {
    throw DataError("recording: channel_labels has " + std::to_string(rec.channel_labels.size()) +
                    " entries for " + std::to_string(rec.n_channels()) + " channels");
  }
  json header{{"version", kFormatVersion},
              {"sample_rate_hz", rec.sample_rate_hz},
              {"n_channels", rec.n_channels()},
              {"n_samples", rec.n_samples()},
              {"channel_labels", rec.channel_labels},
              {"encoding", "f32le"},
              {"layout", "channel-major"}};
  save_json(header, with_suffix(base, "rec", "json"));
  write_f32_payload(rec.samples.data, with_suffix(base, "rec", "f32"));
}

RawRecording load_recording(const fs::path& base) {
  const fs::path header_path = with_suffix(base, "rec", "json");
  const std::string where = header_path.string();
  const json h = load_json(header_path);
  check_header_common(h, where);
  const auto encoding = field<std::string>(h, "encoding", where);
  if (encoding != "f32le") throw FormatError(where + ": unknown encoding '" + encoding + "'");
  const auto layout = field<std::string>(h, "layout", where);
  if (layout != "channel-major") throw FormatError(where + ": unknown layout '" + layout + "'");

  RawRecording rec;
  rec.sample_rate_hz = field<int>(h, "sample_rate_hz", where);
  rec.channel_labels = field<std::vector<std::string>>(h, "channel_labels", where);
  const auto n_channels = field<std::size_t>(h, "n_channels", where);
  const auto n_samples = field<std::size_t>(h, "n_samples", where);
  if (rec.sample_rate_hz <= 0) throw FormatError(where + ": sample_rate_hz must be positive");
  if (n_channels < 1) throw FormatError(where + ": n_channels must be >= 1");
  if (rec.channel_labels.size() != n_channels) {
    throw FormatError(where + ": channel_labels has " + std::to_string(rec.channel_labels.size()) +
                      " entries, n_channels is " + std::to_string(n_channels));
  }
  const fs::path payload_path = with_suffix(base, "rec", "f32");
  rec.samples.rows = n_channels;
  rec.samples.cols = n_samples;
  rec.samples.data = read_f32_payload(payload_path, n_channels * n_samples);
  check_finite(rec.samples.data, payload_path);
  return rec;
}

void save_feature_matrix(const FeatureMatrix& fm, const fs::path& base) {
  if (fm.image_ids.size() != fm.n_rows()) {
    throw DataError("feature matrix: " + std::to_string(fm.image_ids.size()) + " image ids for " +
                    std::to_string(fm.n_rows()) + " rows");
  }
  json header{{"version", kFormatVersion},
              {"n_rows", fm.n_rows()},
              {"n_dims", fm.n_dims()},
              {"image_ids", fm.image_ids}};
  save_json(header, with_suffix(base, "feat", "json"));
  write_f32_payload(fm.values.data, with_suffix(base, "feat", "f32"));
}

FeatureMatrix load_feature_matrix(const fs::path& base) {
  const fs::path header_path = with_suffix(base, "feat", "json");
  const std::string where = header_path.string();
  const json h = load_json(header_path);
  check_header_common(h, where);
  FeatureMatrix fm;
  const auto n_rows = field<std::size_t>(h, "n_rows", where);
  const auto n_dims = field<std::size_t>(h, "n_dims", where);
  fm.image_ids = field<std::vector<std::string>>(h, "image_ids", where);
  if (fm.image_ids.size() != n_rows) {
    throw FormatError(where + ": image_ids has " + std::to_string(fm.image_ids.size()) +
                      " entries, n_rows is " + std::to_string(n_rows));
  }
  const fs::path payload_path = with_suffix(base, "feat", "f32");
  fm.values.rows = n_rows;
  fm.values.cols = n_dims;
  fm.values.data = read_f32_payload(payload_path, n_rows * n_dims);
  check_finite(fm.values.data, payload_path);
  return fm;
}

void save_markers(std::span<const EventMarker> markers, const fs::path& path) {
  std::string text;
  for (const auto& m : markers) {
    text += to_json(m).dump();
    text += '\n';
  }
  save_text(text, path);
}

std::vector<EventMarker> load_markers(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::vector<EventMarker> markers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      markers.push_back(marker_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (std::size_t i = 1; i < markers.size(); ++i) {
    if (markers[i].onset_sample < markers[i - 1].onset_sample) {
      throw DataError(path.string() + ": markers not sorted by onset_sample at line " + std::to_string(i + 1));
    }
  }
  return markers;
}

void save_plan(const RsvpPlan& plan, const fs::path& path) { save_json(to_json(plan), path); }

RsvpPlan load_plan(const fs::path& path) {
  RsvpPlan plan;
  try {
    plan = plan_from_json(load_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    validate_plan(plan);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return plan;
}

void save_log(const AnnotationLog& log, const fs::path& path) { save_json(to_json(log), path); }

AnnotationLog load_log(const fs::path& path) {
  AnnotationLog log;
  try {
    log = log_from_json(load_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  validate_log(log);
  return log;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return std::to_string(v);
  return std::string(buf, end);
}

std::string ranking_to_csv(const Ranking& ranking) {
  std::string out = "rank,image_id,score\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i + 1);
    out += ',';
    out += e.image_id;
    out += ',';
    if (e.score) out += format_double(*e.score);
    out += '\n';
  }
  return out;
}

void save_ranking(const Ranking& ranking, const fs::path& path) { save_text(ranking_to_csv(ranking), path); }

Ranking load_ranking(const fs::path& path, const std::string& query_id) {
  std::istringstream in(load_text(path));
  Ranking ranking;
  ranking.query_id = query_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "rank,image_id,score") throw FormatError(path.string() + ": bad CSV header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    }
    const std::string rank = line.substr(0, c1);
    if (rank != std::to_string(ranking.entries.size() + 1)) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": rank out of sequence");
    }
    RankEntry entry{line.substr(c1 + 1, c2 - c1 - 1), std::nullopt};
    const std::string score = line.substr(c2 + 1);
    if (!score.empty()) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(score.data(), score.data() + score.size(), v);
      if (ec != std::errc{} || ptr != score.data() + score.size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad score '" + score + "'");
      }
      entry.score = v;
    }
    ranking.entries.push_back(std::move(entry));
  }
  return ranking;
}

void save_json(const json& j, const fs::path& path) { save_text(j.dump(2) + "\n", path); }

json load_json(const fs::path& path) {
  const std::string text = load_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON: " + e.what());
  }
}

void save_text(const std::string& text, const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string load_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace eegrf
