#include "kgacc/session.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kgacc/errors.hpp"

namespace kgacc {

namespace {

constexpr int kArchiveVersion = 1;
constexpr std::uint64_t kStratumTag = 0x57a7;

}  // namespace

std::string_view to_string(SessionStatus s) noexcept {
  switch (s) {
    case SessionStatus::sampling: return "sampling";
    case SessionStatus::awaiting_annotations: return "awaiting_annotations";
    case SessionStatus::satisfied: return "satisfied";
    case SessionStatus::aborted: return "aborted";
  }
  return "?";
}

void SessionConfig::validate() const {
  design.validate();
  req.validate();
  cost.validate();
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (max_units < min_units) throw ValidationError("max_units must be >= min_units");
}

nlohmann::json to_json(const SessionConfig& c) {
  return {{"design", to_string(c.design.kind)},
          {"m", c.design.m},
          {"epsilon", c.req.epsilon},
          {"alpha", c.req.alpha},
          {"c1", c.cost.c1},
          {"c2", c.cost.c2},
          {"seed", c.seed},
          {"batch_size", c.batch_size},
          {"min_units", c.min_units},
          {"max_units", c.max_units},
          {"strata", c.strata}};
}

SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig c;
  c.design.kind = parse_design_kind(j.at("design").get<std::string>());
  c.design.m = j.value("m", 5u);
  c.req.epsilon = j.value("epsilon", 0.05);
  c.req.alpha = j.value("alpha", 0.05);
  c.cost.c1 = j.value("c1", 45.0);
  c.cost.c2 = j.value("c2", 25.0);
  c.seed = j.value("seed", std::uint64_t{1});
  c.batch_size = j.value("batch_size", std::size_t{10});
  c.min_units = j.value("min_units", std::size_t{30});
  c.max_units = j.value("max_units", std::size_t{1000000});
  c.strata = j.value("strata", std::size_t{0});
  c.validate();
  return c;
}

void apply_variance_floor(Estimate& e) {
  if (e.n_units == 0 || !e.variance_defined() || e.variance_hat > 0.0) return;
  const double n = static_cast<double>(e.n_units);
  e.variance_hat = 1.0 / (4.0 * n * n);
  finalize(e);
}

Session::Session(const KnowledgeGraph& g, SessionConfig cfg, std::string id, std::optional<ClusterFrame> frame)
    : g_(&g), cfg_(cfg), id_(std::move(id)) {
  cfg_.validate();
  if (g.empty()) throw ValidationError("empty graph");
  switch (cfg_.design.kind) {
    case DesignKind::srs:
      if (frame) throw ValidationError("SRS sessions draw from the whole graph");
      srs_.emplace(g, cfg_.seed);
      break;
    case DesignKind::stratified_twcs: {
      if (frame) throw ValidationError("stratified sessions draw from the whole graph");
      const auto sizes = g.cluster_sizes();
      std::size_t distinct = 0;
      {
        auto s = sizes;
        std::sort(s.begin(), s.end());
        distinct = static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
      }
      const std::size_t H = std::min(cfg_.strata ? cfg_.strata : default_strata_count(g.cluster_count()), distinct);
      strata_ = cum_sqrt_f(sizes, H);
      if (cfg_.batch_size < 2 * strata_->H)
        throw ValidationError("batch_size must be at least 2 per stratum (" + std::to_string(2 * strata_->H) + ")");
      for (auto& members : strata_->members()) stratum_frames_.push_back(ClusterFrame::subset(g, std::move(members)));
      stratum_draws_.resize(strata_->H);
      break;
    }
    default:
      frame_ = frame ? std::move(*frame) : ClusterFrame::whole(g);
      if (frame_.empty()) throw ValidationError("empty sampling frame");
  }
}

std::uint32_t Session::graph_checksum() const {
  if (!checksum_) checksum_ = g_->checksum();
  return *checksum_;
}

std::size_t Session::units() const noexcept {
  std::size_t n = draws_.size();
  for (const auto& s : stratum_draws_) n += s.size();
  return n;
}

std::vector<AnnotationRequest> Session::requests_for(const std::vector<ClusterDraw>& batch, bool missing_only) const {
  std::vector<AnnotationRequest> out;
  std::map<ClusterId, std::size_t> slot;
  for (const auto& d : batch) {
    auto [it, fresh] = slot.emplace(d.cluster, out.size());
    if (fresh) out.push_back({d.cluster, g_->cluster(d.cluster).entity_id, {}});
    auto& r = out[it->second];
    for (TriplePos p : d.triples)
      if (!missing_only || !labels_.count(p)) r.triples.push_back(p);
  }
  for (auto& r : out) {
    std::sort(r.triples.begin(), r.triples.end());
    r.triples.erase(std::unique(r.triples.begin(), r.triples.end()), r.triples.end());
  }
  std::erase_if(out, [](const AnnotationRequest& r) { return r.triples.empty(); });
  return out;
}

std::vector<AnnotationRequest> Session::next_batch() {
  if (status_ != SessionStatus::sampling)
    throw ValidationError(std::string("next_batch in state ") + std::string(to_string(status_)));
  const auto b = static_cast<std::uint32_t>(batches_);
  pending_.clear();
  pending_stratum_.clear();
  const std::size_t room = cfg_.max_units - std::min(cfg_.max_units, units());
  const std::size_t want = std::min(cfg_.batch_size, std::max<std::size_t>(room, 1));
  switch (cfg_.design.kind) {
    case DesignKind::srs: {
      const std::size_t n = std::min(want, g_->triple_count() - srs_->drawn());
      if (n == 0) throw ValidationError("SRS exhausted the graph");
      pending_ = srs_->next(n, b).draws;
      break;
    }
    case DesignKind::rcs: pending_ = rcs_draw(*g_, frame_, want, cfg_.seed, b).draws; break;
    case DesignKind::wcs: pending_ = wcs_draw(*g_, frame_, want, cfg_.seed, b).draws; break;
    case DesignKind::twcs: pending_ = twcs_draw(*g_, frame_, want, cfg_.design.m, cfg_.seed, b).draws; break;
    case DesignKind::stratified_twcs: {
      const auto alloc = allocate(*strata_, std::max(want, 2 * strata_->H));
      for (std::size_t h = 0; h < alloc.size(); ++h) {
        const auto seed = Rng::derive(cfg_.seed, {kStratumTag, h});
        for (auto& d : twcs_draw(*g_, stratum_frames_[h], alloc[h], cfg_.design.m, seed, b).draws) {
          pending_.push_back(std::move(d));
          pending_stratum_.push_back(static_cast<std::uint32_t>(h));
        }
      }
      break;
    }
  }
  status_ = SessionStatus::awaiting_annotations;
  return requests_for(pending_, true);
}

std::vector<AnnotationRequest> Session::pending_requests() const {
  if (status_ != SessionStatus::awaiting_annotations) return {};
  return requests_for(pending_, true);
}

void Session::submit(TriplePos pos, std::uint8_t label) {
  if (label > 1) throw ValidationError("labels must be 0 or 1");
  if (pos >= g_->triple_count()) throw ValidationError("triple position out of range");
  const auto [it, fresh] = labels_.emplace(pos, label);
  if (!fresh && it->second != label)
    throw ValidationError("conflicting label for position " + std::to_string(pos));
}

void Session::submit(const AnnotationRequest& req, std::span<const std::uint8_t> labels) {
  if (labels.size() != req.triples.size()) throw ValidationError("one label per requested triple");
  for (std::size_t i = 0; i < labels.size(); ++i) submit(req.triples[i], labels[i]);
}

bool Session::batch_complete() const {
  if (status_ != SessionStatus::awaiting_annotations) return false;
  for (const auto& d : pending_)
    for (TriplePos p : d.triples)
      if (!labels_.count(p)) return false;
  return true;
}

const Estimate& Session::complete_batch() {
  if (status_ != SessionStatus::awaiting_annotations) throw ValidationError("no pending batch");
  if (!batch_complete()) throw ValidationError("pending batch has unlabeled triples");
  for (std::size_t i = 0; i < pending_.size(); ++i) {
    auto& d = pending_[i];
    d.labels.clear();
    for (TriplePos p : d.triples) d.labels.push_back(labels_.at(p));
    if (strata_) stratum_draws_[pending_stratum_[i]].push_back(std::move(d));
    else draws_.push_back(std::move(d));
  }
  pending_.clear();
  pending_stratum_.clear();
  ++batches_;
  estimate_ = estimate_from(draws_, stratum_draws_);
  if (estimate_.moe <= cfg_.req.epsilon && units() >= cfg_.min_units) status_ = SessionStatus::satisfied;
  else if (units() >= cfg_.max_units) {
    status_ = SessionStatus::aborted;
    abort_reason_ = "max_units reached before the margin of error";
  } else status_ = SessionStatus::sampling;
  return estimate_;
}

Estimate Session::estimate_from(const std::vector<ClusterDraw>& draws,
                                const std::vector<std::vector<ClusterDraw>>& strata) const {
  const double alpha = cfg_.req.alpha;
  if (!strata_) {
    Estimate e = estimate_draws(cfg_.design.kind, draws, *g_, alpha);
    apply_variance_floor(e);
    return e;
  }
  std::vector<std::pair<double, Estimate>> parts;
  std::vector<ClusterDraw> all;
  for (std::size_t h = 0; h < strata_->H; ++h) {
    Estimate e = estimate_draws(DesignKind::twcs, strata[h], *g_, alpha);
    apply_variance_floor(e);
    parts.emplace_back(strata_->weights[h], e);
    all.insert(all.end(), strata[h].begin(), strata[h].end());
  }
  Estimate e = est_stratified(parts);
  e.footprint = footprint_of(*g_, all);
  return e;
}

Estimate Session::recompute() const {
  if (batches_ == 0) throw ValidationError("no completed batch");
  return estimate_from(draws_, stratum_draws_);
}

void Session::abort(std::string reason) {
  status_ = SessionStatus::aborted;
  abort_reason_ = std::move(reason);
}

CostReport Session::cost() const {
  CostReport r;
  if (batches_ == 0) return r;
  r.footprint = estimate_.footprint;
  r.seconds = cost_seconds(r.footprint, cfg_.cost);
  return r;
}

nlohmann::json Session::archive() const {
  std::vector<std::pair<TriplePos, int>> labels(labels_.begin(), labels_.end());
  std::sort(labels.begin(), labels.end());
  nlohmann::json j = {{"archive_version", kArchiveVersion},
                      {"id", id_},
                      {"graph_checksum", graph_checksum()},
                      {"config", to_json(cfg_)},
                      {"status", to_string(status_)},
                      {"abort_reason", abort_reason_},
                      {"batches", batches_},
                      {"pending", status_ == SessionStatus::awaiting_annotations},
                      {"labels", labels}};
  if (batches_ > 0) j["estimate"] = to_json(estimate_);
  return j;
}

Session Session::resume(const KnowledgeGraph& g, const nlohmann::json& a) {
  if (a.value("archive_version", 0) != kArchiveVersion) throw VersionError("unsupported session archive version");
  if (a.at("graph_checksum").get<std::uint32_t>() != g.checksum())
    throw ChecksumError("session archive was written for a different graph");
  Session s(g, session_config_from_json(a.at("config")), a.at("id").get<std::string>());
  for (const auto& row : a.at("labels")) s.submit(row.at(0).get<TriplePos>(), row.at(1).get<std::uint8_t>());
  const auto batches = a.at("batches").get<std::size_t>();
  for (std::size_t b = 0; b < batches; ++b) {
    s.next_batch();
    if (!s.batch_complete()) throw ValidationError("session archive is missing labels of a completed batch");
    s.complete_batch();
  }
  if (a.at("pending").get<bool>() && s.status_ == SessionStatus::sampling) s.next_batch();
  return s;
}

void drive(Session& s, AnnotationBackend& backend) {
  if (s.status() == SessionStatus::aborted) return;
  while (s.status() == SessionStatus::sampling || s.status() == SessionStatus::awaiting_annotations) {
    const auto reqs = s.status() == SessionStatus::sampling ? s.next_batch() : s.pending_requests();
    if (!reqs.empty()) {
      std::vector<std::vector<std::uint8_t>> labels;
      try {
        labels = backend.annotate(s.graph(), reqs);
      } catch (const BackendError& e) {
        s.abort(std::string("backend: ") + e.what());
        return;
      }
      if (labels.size() != reqs.size()) {
        s.abort("backend returned the wrong number of answers");
        return;
      }
      for (std::size_t i = 0; i < reqs.size(); ++i) s.submit(reqs[i], labels[i]);
    }
    s.complete_batch();
  }
}

StaticResult run_static(const KnowledgeGraph& g, const SessionConfig& cfg, AnnotationBackend& backend) {
  StaticResult r;
  r.session = std::make_unique<Session>(g, cfg);
  drive(*r.session, backend);
  r.estimate = r.session->estimate();
  r.cost = r.session->cost();
  return r;
}

}  // namespace kgacc
