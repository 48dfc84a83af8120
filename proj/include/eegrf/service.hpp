#pragma once

// HTTP backend for the annotation interface.
//
//   GET  /api/sessions/{id}/manifest
//   GET  /api/images/{id}
//   POST /api/sessions/{id}/events   {"events": [{seq, t_ms, kind, image_id?, page?}, ...]}
//   POST /api/sessions/{id}/finish
//
// Requests are routed through AnnotationService::handle so the behaviour can
// be exercised without a socket; serve() binds it to an httplib server.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "eegrf/dataio.hpp"

namespace httplib {
class Server;
}

namespace eegrf {

struct SessionSpec {
  std::string session_id = "s1";
  AnnotationMode mode = AnnotationMode::kMouse;
  RsvpPlan plan;
  double duration_s = 200.0;
  int page_size = 20;
  std::string query_text;
  std::vector<std::string> example_image_ids;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class AnnotationService {
 public:
  // images_dir holds <image_id>.png; finished logs go to sessions_dir.
  AnnotationService(std::filesystem::path images_dir, std::filesystem::path sessions_dir);

  void add_session(const SessionSpec& spec);

  // arrival_ms < 0 means "now" (wall clock).
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body,
                      std::int64_t arrival_ms = -1);

  // Current log of a session (accepted events only), for inspection.
  std::optional<AnnotationLog> session_log(const std::string& session_id) const;

 private:
  struct Session {
    SessionSpec spec;
    std::vector<std::string> display_order;
    std::unordered_set<std::string> image_ids;
    std::unordered_set<std::string> targets;
    mutable std::mutex mu;
    AnnotationLog log;
    std::set<std::int64_t> seen_seq;
    bool finished = false;
  };

  Session* find(const std::string& session_id) const;
  HttpResponse manifest(const Session& s) const;
  HttpResponse image(const std::string& image_id) const;
  HttpResponse post_events(Session& s, const std::string& body, std::int64_t arrival_ms);
  HttpResponse finish(Session& s);

  std::filesystem::path images_dir_;
  std::filesystem::path sessions_dir_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
};

// Binds an AnnotationService to a socket.
class ServiceServer {
 public:
  explicit ServiceServer(AnnotationService& service);
  ~ServiceServer();
  ServiceServer(const ServiceServer&) = delete;
  ServiceServer& operator=(const ServiceServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws IoError.
  int bind(const std::string& host, int port);
  // Serves until stop() is called from another thread.
  void listen();
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace eegrf
