#pragma once

// Annotation service: evaluation sessions exposed to human annotators as
// entity-grouped tasks.
//
// JSON API (bearer token = annotator id, required on task routes):
//
//   POST /sessions                 {"graph", "design", "m", "epsilon", "alpha",
//                                   "seed", "batch_size", "min_units", "c1", "c2"}
//                                  -> 201 {"session_id", "status", ...}
//   GET  /sessions/{id}/tasks/next -> 200 {"task": {...} | null, "status"}
//   POST /tasks/{id}/labels        {"labels": [true, false, ...]} in item order
//                                  -> 200 {"task_id", "status", "duplicate"}
//   GET  /sessions/{id}/estimate   -> 200 {"mu_hat", "moe", "ci", "status", ...}
//   GET  /sessions/{id}/archive    -> 200 session archive
//   GET  /health                   -> 200 {"ok": true}
//
// Errors are {"error": message} with 400 (malformed body), 401 (no token),
// 404 (unknown id), 409 (lease missing, expired or held by another
// annotator; conflicting resubmission) or 422 (invalid config, incomplete
// labels).
//
// One task per drawn cluster of the pending batch. A task is leased to one
// annotator at a time; an expired lease returns the task to open. Every state
// change happens under one mutex.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgacc/session.hpp"

namespace httplib {
class Server;
}

namespace kgacc {

class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

enum class TaskStatus { open, leased, submitted };

std::string_view to_string(TaskStatus s) noexcept;

struct ServiceOptions {
  std::chrono::seconds lease_ttl{15 * 60};
  std::size_t context_siblings = 5;
  std::function<std::chrono::system_clock::time_point()> clock = [] { return std::chrono::system_clock::now(); };
};

class AnnotationService {
 public:
  explicit AnnotationService(ServiceOptions opts = {});
  ~AnnotationService();

  // Graphs are referenced by name in POST /sessions.
  void add_graph(const std::string& name, std::shared_ptr<const KnowledgeGraph> g);

  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json next_task(const std::string& session_id, const std::string& annotator);
  nlohmann::json submit_labels(const std::string& task_id, const std::string& annotator, const nlohmann::json& body);
  nlohmann::json estimate(const std::string& session_id) const;
  nlohmann::json archive(const std::string& session_id) const;

  // Direct access for in-process drivers and tests.
  const Session& session(const std::string& session_id) const;

 private:
  struct Task;
  struct SessionEntry;

  SessionEntry& find_session(const std::string& id);
  const SessionEntry& find_session(const std::string& id) const;
  void open_tasks(SessionEntry& s);
  void expire_leases(SessionEntry& s, std::chrono::system_clock::time_point now);
  nlohmann::json task_json(const SessionEntry& s, const Task& t) const;

  ServiceOptions opts_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const KnowledgeGraph>> graphs_;
  std::map<std::string, std::unique_ptr<SessionEntry>> sessions_;
  std::map<std::string, std::pair<SessionEntry*, std::size_t>> task_index_;
  std::uint64_t next_session_ = 1;
};

// Routes of the JSON API bound to `svc`. The caller listens and stops.
std::unique_ptr<httplib::Server> make_http_server(AnnotationService& svc);

}  // namespace kgacc
