#include "kgacc/service.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <httplib.h>

#include "kgacc/errors.hpp"

namespace kgacc {

using json = nlohmann::json;
using time_point = std::chrono::system_clock::time_point;

std::string_view to_string(TaskStatus s) noexcept {
  switch (s) {
    case TaskStatus::open: return "open";
    case TaskStatus::leased: return "leased";
    case TaskStatus::submitted: return "submitted";
  }
  return "?";
}

struct AnnotationService::Task {
  std::string id;
  AnnotationRequest request;
  std::size_t batch = 0;
  TaskStatus status = TaskStatus::open;
  std::string annotator;
  time_point expiry{};
  std::vector<std::uint8_t> labels;  // set once submitted
};

struct AnnotationService::SessionEntry {
  std::string graph_name;
  std::shared_ptr<const KnowledgeGraph> graph;
  std::unique_ptr<Session> session;
  std::vector<Task> tasks;  // creation order; the oldest open task is leased first
  std::size_t first_live = 0;
};

namespace {

std::int64_t epoch_ms(time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

json triple_json(const KnowledgeGraph& g, TriplePos p) {
  const auto& t = g.triple(p);
  return {{"triple", p}, {"subject", t.subject}, {"predicate", t.predicate}, {"object", t.object},
          {"object_kind", to_string(t.object_kind)}};
}

template <class T>
T field(const json& body, const char* key, T fallback) {
  if (!body.contains(key) || body[key].is_null()) return fallback;
  try {
    return body[key].get<T>();
  } catch (const json::exception&) {
    throw ServiceError(422, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

AnnotationService::AnnotationService(ServiceOptions opts) : opts_(std::move(opts)) {
  if (!opts_.clock) opts_.clock = [] { return std::chrono::system_clock::now(); };
}

AnnotationService::~AnnotationService() = default;

void AnnotationService::add_graph(const std::string& name, std::shared_ptr<const KnowledgeGraph> g) {
  if (!g) throw ValidationError("null graph");
  std::lock_guard lock(mu_);
  graphs_[name] = std::move(g);
}

AnnotationService::SessionEntry& AnnotationService::find_session(const std::string& id) {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
  return *it->second;
}

const AnnotationService::SessionEntry& AnnotationService::find_session(const std::string& id) const {
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session " + id);
  return *it->second;
}

const Session& AnnotationService::session(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return *find_session(session_id).session;
}

json AnnotationService::create_session(const json& body) {
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  std::lock_guard lock(mu_);
  const auto graph_name = field<std::string>(body, "graph", "");
  auto git = graphs_.find(graph_name);
  if (git == graphs_.end()) throw ServiceError(404, "unknown graph '" + graph_name + "'");

  SessionConfig cfg;
  try {
    cfg.design.kind = parse_design_kind(field<std::string>(body, "design", "twcs"));
    cfg.design.m = field<std::uint32_t>(body, "m", cfg.design.m);
    cfg.req.epsilon = field<double>(body, "epsilon", cfg.req.epsilon);
    cfg.req.alpha = field<double>(body, "alpha", cfg.req.alpha);
    cfg.cost.c1 = field<double>(body, "c1", cfg.cost.c1);
    cfg.cost.c2 = field<double>(body, "c2", cfg.cost.c2);
    cfg.seed = field<std::uint64_t>(body, "seed", cfg.seed);
    cfg.batch_size = field<std::size_t>(body, "batch_size", cfg.batch_size);
    cfg.min_units = field<std::size_t>(body, "min_units", cfg.min_units);
    cfg.max_units = field<std::size_t>(body, "max_units", cfg.max_units);
    cfg.strata = field<std::size_t>(body, "strata", cfg.strata);
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ServiceError(422, e.what());
  }

  const std::string id = "s" + std::to_string(next_session_++);
  auto entry = std::make_unique<SessionEntry>();
  entry->graph_name = graph_name;
  entry->graph = git->second;
  try {
    entry->session = std::make_unique<Session>(*entry->graph, cfg, id);
  } catch (const ValidationError& e) {
    throw ServiceError(422, e.what());
  }
  auto& s = *entry;
  sessions_.emplace(id, std::move(entry));
  open_tasks(s);
  return {{"session_id", id}, {"status", to_string(s.session->status())}, {"config", to_json(cfg)},
          {"graph", graph_name}};
}

// Draws batches until one needs annotation or the session stops.
void AnnotationService::open_tasks(SessionEntry& s) {
  auto& sess = *s.session;
  while (sess.status() == SessionStatus::sampling) {
    auto requests = sess.next_batch();
    if (requests.empty()) {
      sess.complete_batch();
      continue;
    }
    s.first_live = s.tasks.size();
    for (auto& r : requests) {
      Task t;
      t.id = sess.id() + "-t" + std::to_string(s.tasks.size() + 1);
      t.request = std::move(r);
      t.batch = sess.batches();
      task_index_[t.id] = {&s, s.tasks.size()};
      s.tasks.push_back(std::move(t));
    }
    return;
  }
}

void AnnotationService::expire_leases(SessionEntry& s, time_point now) {
  for (std::size_t i = s.first_live; i < s.tasks.size(); ++i) {
    auto& t = s.tasks[i];
    if (t.status == TaskStatus::leased && now >= t.expiry) {
      t.status = TaskStatus::open;
      t.annotator.clear();
    }
  }
}

json AnnotationService::task_json(const SessionEntry& s, const Task& t) const {
  const auto& g = *s.graph;
  const auto& req = t.request;
  std::set<TriplePos> items(req.triples.begin(), req.triples.end());

  // Other triples of the same entity already in the sample (labels withheld).
  json sampled = json::array();
  std::set<TriplePos> shown;
  const auto key = g.entity_key(req.cluster);
  auto add_sampled = [&](const std::vector<ClusterDraw>& draws) {
    for (const auto& d : draws) {
      if (g.entity_key(d.cluster) != key) continue;
      for (TriplePos p : d.triples)
        if (!items.count(p) && shown.insert(p).second) sampled.push_back(triple_json(g, p));
    }
  };
  add_sampled(s.session->draws());
  for (const auto& sd : s.session->stratum_draws()) add_sampled(sd);

  json siblings = json::array();
  for (TriplePos p : g.cluster(req.cluster).triples) {
    if (siblings.size() >= opts_.context_siblings) break;
    if (!items.count(p) && !shown.count(p)) siblings.push_back(triple_json(g, p));
  }

  json item_list = json::array();
  for (std::size_t i = 0; i < req.triples.size(); ++i) {
    auto j = triple_json(g, req.triples[i]);
    j["label"] = t.status == TaskStatus::submitted ? json(t.labels[i] != 0) : json(nullptr);
    item_list.push_back(std::move(j));
  }

  json lease = nullptr;
  if (t.status == TaskStatus::leased)
    lease = {{"annotator", t.annotator}, {"expires_at_ms", epoch_ms(t.expiry)}};

  return {{"task_id", t.id},
          {"session_id", s.session->id()},
          {"entity_id", req.entity_id},
          {"cluster", req.cluster},
          {"cluster_size", g.cluster_size(req.cluster)},
          {"batch", t.batch},
          {"status", to_string(t.status)},
          {"lease", lease},
          {"context",
           {{"hint", "Identify the entity '" + req.entity_id +
                         "' from the triples below, then mark each item true if the fact holds for it."},
            {"sampled", sampled},
            {"siblings", siblings}}},
          {"items", item_list}};
}

json AnnotationService::next_task(const std::string& session_id, const std::string& annotator) {
  if (annotator.empty()) throw ServiceError(401, "missing annotator token");
  std::lock_guard lock(mu_);
  auto& s = find_session(session_id);
  const auto now = opts_.clock();
  expire_leases(s, now);
  Task* pick = nullptr;
  for (std::size_t i = s.first_live; i < s.tasks.size() && !pick; ++i) {
    auto& t = s.tasks[i];
    if (t.status == TaskStatus::leased && t.annotator == annotator) pick = &t;
  }
  for (std::size_t i = s.first_live; i < s.tasks.size() && !pick; ++i)
    if (s.tasks[i].status == TaskStatus::open) pick = &s.tasks[i];
  json out = {{"session_id", session_id}, {"status", to_string(s.session->status())}};
  if (!pick) {
    out["task"] = nullptr;
    return out;
  }
  if (pick->status == TaskStatus::open) {
    pick->status = TaskStatus::leased;
    pick->annotator = annotator;
    pick->expiry = now + opts_.lease_ttl;
  }
  out["task"] = task_json(s, *pick);
  return out;
}

json AnnotationService::submit_labels(const std::string& task_id, const std::string& annotator, const json& body) {
  if (annotator.empty()) throw ServiceError(401, "missing annotator token");
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  std::lock_guard lock(mu_);
  auto it = task_index_.find(task_id);
  if (it == task_index_.end()) throw ServiceError(404, "unknown task " + task_id);
  auto& s = *it->second.first;
  auto& t = s.tasks[it->second.second];

  const auto& raw = body.contains("labels") ? body["labels"] : json(nullptr);
  if (!raw.is_array()) throw ServiceError(422, "'labels' must be an array with one entry per item");
  std::vector<std::uint8_t> labels;
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].is_boolean()) labels.push_back(raw[i].get<bool>() ? 1 : 0);
    else if (raw[i].is_number_integer() && (raw[i] == 0 || raw[i] == 1)) labels.push_back(raw[i].get<int>() != 0);
    else {
      missing.push_back(i);
      labels.push_back(0);
    }
  }
  for (std::size_t i = raw.size(); i < t.request.triples.size(); ++i) missing.push_back(i);
  if (!missing.empty() || raw.size() != t.request.triples.size()) {
    json err = {{"error", "every item needs a true/false label"}, {"unlabeled", missing}};
    throw ServiceError(422, err.dump());
  }

  if (t.status == TaskStatus::submitted) {
    if (labels != t.labels) throw ServiceError(409, "task " + task_id + " was already submitted with other labels");
    return {{"task_id", task_id}, {"status", "submitted"}, {"duplicate", true},
            {"session_status", to_string(s.session->status())}};
  }
  const auto now = opts_.clock();
  expire_leases(s, now);
  if (t.status != TaskStatus::leased) throw ServiceError(409, "no active lease on task " + task_id);
  if (t.annotator != annotator) throw ServiceError(409, "task " + task_id + " is leased to another annotator");

  s.session->submit(t.request, labels);
  t.labels = std::move(labels);
  t.status = TaskStatus::submitted;
  if (s.session->batch_complete()) {
    s.session->complete_batch();
    open_tasks(s);
  }
  return {{"task_id", task_id}, {"status", "submitted"}, {"duplicate", false},
          {"session_status", to_string(s.session->status())}};
}

json AnnotationService::estimate(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  const auto& s = find_session(session_id);
  const auto& sess = *s.session;
  const auto& cfg = sess.config();
  std::size_t open = 0, leased = 0, submitted = 0;
  const auto now = opts_.clock();
  for (std::size_t i = s.first_live; i < s.tasks.size(); ++i) {
    const auto& t = s.tasks[i];
    if (t.status == TaskStatus::submitted) ++submitted;
    else if (t.status == TaskStatus::leased && now < t.expiry) ++leased;
    else ++open;
  }
  json out = {{"session_id", session_id},
              {"status", to_string(sess.status())},
              {"epsilon", cfg.req.epsilon},
              {"alpha", cfg.req.alpha},
              {"units", sess.units()},
              {"min_units", cfg.min_units},
              {"batches", sess.batches()},
              {"tasks", {{"open", open}, {"leased", leased}, {"submitted", submitted}, {"total", s.tasks.size()}}},
              {"mu_hat", nullptr},
              {"moe", nullptr},
              {"ci", nullptr}};
  if (sess.has_estimate()) {
    const auto& e = sess.estimate();
    out["mu_hat"] = e.mu_hat;
    out["moe"] = std::isfinite(e.moe) ? json(e.moe) : json(nullptr);
    out["ci"] = {e.ci_lo, e.ci_hi};
    const auto c = sess.cost();
    out["cost_hours"] = c.hours();
  }
  if (sess.status() == SessionStatus::aborted) out["abort_reason"] = sess.abort_reason();
  return out;
}

json AnnotationService::archive(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  return find_session(session_id).session->archive();
}

// --- HTTP ---------------------------------------------------------------------

namespace {

std::string bearer(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) return h.substr(prefix.size());
  return {};
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    // 422 bodies may already be JSON objects.
    auto parsed = json::parse(e.what(), nullptr, false);
    reply(res, e.status(), parsed.is_object() ? parsed : json{{"error", e.what()}});
  } catch (const ValidationError& e) {
    reply(res, 422, {{"error", e.what()}});
  } catch (const json::exception& e) {
    reply(res, 400, {{"error", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"error", e.what()}});
  }
}

json parse_body(const httplib::Request& req) {
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw ServiceError(400, "malformed JSON body");
  return j;
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(AnnotationService& svc) {
  auto srv = std::make_unique<httplib::Server>();
  srv->Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"ok", true}}); });
  srv->Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 201, svc.create_session(parse_body(req))); });
  });
  srv->Get(R"(/sessions/([^/]+)/tasks/next)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.next_task(req.matches[1], bearer(req))); });
  });
  srv->Post(R"(/tasks/([^/]+)/labels)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto who = bearer(req);
      if (who.empty()) throw ServiceError(401, "missing annotator token");
      reply(res, 200, svc.submit_labels(req.matches[1], who, parse_body(req)));
    });
  });
  srv->Get(R"(/sessions/([^/]+)/estimate)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.estimate(req.matches[1])); });
  });
  srv->Get(R"(/sessions/([^/]+)/archive)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, svc.archive(req.matches[1])); });
  });
  return srv;
}

}  // namespace kgacc
