#include "kgacc/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kgacc/errors.hpp"

namespace kgacc {

namespace {

constexpr std::uint64_t kRsSubTag = 0x2501;
constexpr std::uint64_t kSsTag = 0x5501;
constexpr std::uint64_t kRefreshTag = 0x5502;
constexpr std::uint64_t kBaselineTag = 0xba5e;

double target_variance(const Requirement& req) {
  const double z = req.z();
  return (req.epsilon / z) * (req.epsilon / z);
}

Estimate twcs_estimate(const KnowledgeGraph& g, const std::vector<ClusterDraw>& draws, double alpha) {
  Estimate e = estimate_draws(DesignKind::twcs, draws, g, alpha);
  apply_variance_floor(e);
  return e;
}

std::size_t clamp_size(double want, std::size_t lo, std::size_t hi) {
  if (!(want < static_cast<double>(hi))) return hi;
  return std::clamp(static_cast<std::size_t>(std::max(0.0, std::ceil(want))), lo, hi);
}

}  // namespace

GraphVersions GraphVersions::from_marks(const KnowledgeGraph& g, std::vector<std::size_t> marks) {
  if (marks.empty()) throw ValidationError("need at least one graph version");
  GraphVersions v;
  v.graph = &g;
  const auto cum = g.cluster_sizes();
  std::size_t prev = 0, triples = 0, c = 0;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (marks[i] > g.cluster_count()) throw ValidationError("version mark beyond the graph");
    if (i > 0 ? marks[i] < prev : marks[i] == 0) throw ValidationError("version marks must be non-decreasing");
    for (; c < marks[i]; ++c) triples += cum[c];
    v.clusters.push_back(marks[i]);
    v.triples.push_back(triples);
    prev = marks[i];
  }
  v.all_ = ClusterFrame::whole(g);
  return v;
}

ClusterFrame GraphVersions::frame(std::size_t version) const {
  return all_.slice(0, static_cast<ClusterId>(clusters.at(version)));
}

ClusterFrame GraphVersions::increment(std::size_t version) const {
  const std::size_t first = version == 0 ? 0 : clusters.at(version - 1);
  return all_.slice(static_cast<ClusterId>(first), static_cast<ClusterId>(clusters.at(version)));
}

std::string_view to_string(EvolveMethod m) noexcept {
  switch (m) {
    case EvolveMethod::baseline: return "baseline";
    case EvolveMethod::rs: return "rs";
    case EvolveMethod::ss: return "ss";
  }
  return "?";
}

EvolveMethod parse_evolve_method(std::string_view name) {
  if (name == "baseline") return EvolveMethod::baseline;
  if (name == "rs") return EvolveMethod::rs;
  if (name == "ss") return EvolveMethod::ss;
  throw ValidationError("unknown method '" + std::string(name) + "' (baseline, rs, ss)");
}

void EvolveConfig::validate() const {
  if (m < 1) throw ValidationError("m must be >= 1");
  req.validate();
  cost.validate();
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (batch_cap < 2) throw ValidationError("batch_cap must be >= 2");
}

nlohmann::json to_json(const EvolveConfig& c) {
  return {{"m", c.m},           {"epsilon", c.req.epsilon}, {"alpha", c.req.alpha},
          {"c1", c.cost.c1},    {"c2", c.cost.c2},          {"seed", c.seed},
          {"batch_size", c.batch_size}, {"min_units", c.min_units}, {"batch_cap", c.batch_cap},
          {"refresh_base", c.refresh_base}};
}

nlohmann::json to_json(const StepReport& r) {
  return {{"version", r.version},
          {"clusters", r.clusters},
          {"triples", r.triples},
          {"estimate", to_json(r.estimate)},
          {"work", {{"unique_entities", r.work.unique_entities}, {"triples", r.work.triples}}},
          {"step_seconds", r.step_seconds},
          {"total_seconds", r.total_seconds},
          {"units", r.units},
          {"satisfied", r.satisfied}};
}

// ---------------------------------------------------------------------------

void Annotator::label(std::vector<ClusterDraw*> draws) {
  std::vector<AnnotationRequest> reqs;
  std::map<ClusterId, std::size_t> slot;
  for (const ClusterDraw* d : draws)
    for (TriplePos p : d->triples) {
      if (cache_.count(p)) continue;
      auto [it, fresh] = slot.emplace(d->cluster, reqs.size());
      if (fresh) reqs.push_back({d->cluster, g_->cluster(d->cluster).entity_id, {}});
      auto& t = reqs[it->second].triples;
      if (std::find(t.begin(), t.end(), p) == t.end()) t.push_back(p);
    }
  if (!reqs.empty()) {
    const auto answers = backend_->annotate(*g_, reqs);
    if (answers.size() != reqs.size()) throw BackendError("backend returned the wrong number of answers");
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      if (answers[i].size() != reqs[i].triples.size()) throw BackendError("backend returned a short answer");
      for (std::size_t j = 0; j < answers[i].size(); ++j) cache_[reqs[i].triples[j]] = answers[i][j];
      work_triples_ += reqs[i].triples.size();
      work_entities_.push_back(g_->entity_key(reqs[i].cluster));
    }
  }
  for (ClusterDraw* d : draws) {
    d->labels.clear();
    for (TriplePos p : d->triples) d->labels.push_back(cache_.at(p));
  }
}

SampleFootprint Annotator::take_work() {
  std::sort(work_entities_.begin(), work_entities_.end());
  const auto distinct = std::unique(work_entities_.begin(), work_entities_.end()) - work_entities_.begin();
  SampleFootprint fp{static_cast<std::size_t>(distinct), work_triples_};
  work_entities_.clear();
  work_triples_ = 0;
  return fp;
}

// ---------------------------------------------------------------------------

RsEvaluator::RsEvaluator(const GraphVersions& versions, EvolveConfig cfg, AnnotationBackend& backend)
    : v_(&versions), cfg_(cfg), annot_(*versions.graph, backend) {
  cfg_.validate();
}

void RsEvaluator::annotate_members() {
  std::vector<ClusterDraw*> fresh;
  for (const auto& e : res_.entries()) {
    if (drawn_.count(e.cluster)) continue;
    Rng rng = Rng::stream(cfg_.seed, kRsSubTag, e.cluster);
    const auto& g = *v_->graph;
    auto& d = drawn_[e.cluster];
    d = {e.cluster, g.cluster_size(e.cluster), subsample(g, e.cluster, cfg_.m, rng), {}};
    fresh.push_back(&d);
  }
  annot_.label(std::move(fresh));
}

std::vector<ClusterDraw> RsEvaluator::pool() const {
  std::vector<ClusterDraw> out;
  for (ClusterId c : res_.members()) out.push_back(drawn_.at(c));
  return out;
}

Estimate RsEvaluator::current() const { return twcs_estimate(*v_->graph, pool(), cfg_.req.alpha); }

StepReport RsEvaluator::finish(std::size_t version, bool grow_fixed) {
  const auto& g = *v_->graph;
  Estimate e = current();
  const double target = target_variance(cfg_.req);
  while (!(e.moe <= cfg_.req.epsilon && e.n_units >= cfg_.min_units)) {
    std::size_t extra = cfg_.batch_size;
    if (!grow_fixed) {
      // Enough extra units to bring the variance to target at the current
      // per-unit variance.
      const double n = static_cast<double>(e.n_units);
      const double need = e.variance_hat * n / target - n;
      extra = clamp_size(need, 1, cfg_.batch_cap);
      if (e.n_units + extra < cfg_.min_units) extra = cfg_.min_units - e.n_units;
    }
    if (reservoir_grow(res_, g, extra).empty()) break;
    annotate_members();
    e = current();
  }
  StepReport r;
  r.version = version;
  r.clusters = v_->clusters[version];
  r.triples = v_->triples[version];
  r.estimate = e;
  r.work = annot_.take_work();
  r.step_seconds = cost_seconds(r.work, cfg_.cost);
  total_ += r.step_seconds;
  r.total_seconds = total_;
  r.units = e.n_units;
  r.satisfied = e.moe <= cfg_.req.epsilon && e.n_units >= cfg_.min_units;
  return r;
}

StepReport RsEvaluator::base() {
  res_ = reservoir_seed(*v_->graph, cfg_.batch_size, cfg_.seed, v_->clusters[0]);
  annotate_members();
  return finish(0, true);
}

StepReport RsEvaluator::step(std::size_t version) {
  if (version == 0 || version >= v_->count()) throw ValidationError("version out of range");
  auto upd = reservoir_update(res_, *v_->graph, v_->clusters[version]);
  admissions_ += upd.admissions;
  res_ = std::move(upd.state);
  annotate_members();
  return finish(version, false);
}

// ---------------------------------------------------------------------------

std::uint64_t StratumLedger::mass() const noexcept {
  std::uint64_t m = 0;
  for (const auto& e : entries) m += e.mass;
  return m;
}

Estimate StratumLedger::combine() const {
  const double total = static_cast<double>(mass());
  std::vector<std::pair<double, Estimate>> parts;
  double wsum = 0;
  for (const auto& e : entries) {
    if (e.mass == 0) continue;
    parts.emplace_back(static_cast<double>(e.mass) / total, e.estimate);
    wsum += parts.back().first;
  }
  // Rounding of mass ratios stays far inside the 1e-9 tolerance; renormalize
  // the last weight so the sum is exact.
  if (!parts.empty()) parts.back().first += 1.0 - wsum;
  return est_stratified(parts);
}

nlohmann::json StratumLedger::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json draws = nlohmann::json::array();
    for (const auto& d : e.draws) draws.push_back({{"cluster", d.cluster}, {"triples", d.triples}, {"labels", d.labels}});
    arr.push_back({{"label", e.label},
                   {"version", e.version},
                   {"mass", e.mass},
                   {"batches", e.batches},
                   {"estimate", kgacc::to_json(e.estimate)},
                   {"draws", draws}});
  }
  return {{"ledger_version", 1}, {"strata", arr}};
}

SsEvaluator::SsEvaluator(const GraphVersions& versions, EvolveConfig cfg, AnnotationBackend& backend)
    : v_(&versions), cfg_(cfg), annot_(*versions.graph, backend) {
  cfg_.validate();
}

void SsEvaluator::sample_stratum(std::size_t h, std::size_t n) {
  auto& s = ledger_.entries[h];
  const auto seed = Rng::derive(cfg_.seed, {kSsTag, s.version});
  auto batch = twcs_draw(*v_->graph, frames_[h], n, cfg_.m, seed, s.batches++).draws;
  std::vector<ClusterDraw*> ptrs;
  for (auto& d : batch) ptrs.push_back(&d);
  annot_.label(std::move(ptrs));
  s.draws.insert(s.draws.end(), std::make_move_iterator(batch.begin()), std::make_move_iterator(batch.end()));
  if (s.draws.size() >= 2) s.estimate = twcs_estimate(*v_->graph, s.draws, cfg_.req.alpha);
}

void SsEvaluator::evaluate_base(std::uint64_t seed) {
  auto& s = ledger_.entries[0];
  s.draws.clear();
  s.batches = 0;
  const auto saved = cfg_.seed;
  cfg_.seed = seed;
  do {
    sample_stratum(0, cfg_.batch_size);
  } while (!(s.estimate.moe <= cfg_.req.epsilon && s.draws.size() >= cfg_.min_units));
  cfg_.seed = saved;
}

StepReport SsEvaluator::base() {
  ledger_.entries.clear();
  frames_.clear();
  ledger_.entries.push_back({"G", 0, v_->triples[0], {}, {}, 0});
  frames_.push_back(v_->frame(0));
  evaluate_base(cfg_.seed);
  StepReport r;
  r.clusters = v_->clusters[0];
  r.triples = v_->triples[0];
  r.estimate = ledger_.combine();
  r.work = annot_.take_work();
  r.step_seconds = cost_seconds(r.work, cfg_.cost);
  total_ = r.step_seconds;
  r.total_seconds = total_;
  r.units = ledger_.entries[0].draws.size();
  r.satisfied = r.estimate.moe <= cfg_.req.epsilon && r.units >= cfg_.min_units;
  return r;
}

StepReport SsEvaluator::step(std::size_t version) {
  if (version == 0 || version >= v_->count()) throw ValidationError("version out of range");
  if (ledger_.entries.empty()) throw ValidationError("base() must run first");
  if (cfg_.refresh_base) evaluate_base(Rng::derive(cfg_.seed, {kRefreshTag, version}));
  const std::uint64_t mass = v_->triples[version] - v_->triples[version - 1];
  if (mass > 0) {
    ledger_.entries.push_back({"D" + std::to_string(version), version, mass, {}, {}, 0});
    frames_.push_back(v_->increment(version));
  }
  const double target = target_variance(cfg_.req);
  const double total = static_cast<double>(ledger_.mass());
  const std::size_t last = ledger_.entries.size() - 1;
  auto weight = [&](std::size_t h) { return static_cast<double>(ledger_.entries[h].mass) / total; };
  auto others = [&](std::size_t skip) {
    double v = 0;
    for (std::size_t h = 0; h < ledger_.entries.size(); ++h)
      if (h != skip) v += weight(h) * weight(h) * ledger_.entries[h].estimate.variance_hat;
    return v;
  };
  auto units = [&] {
    std::size_t n = 0;
    for (const auto& e : ledger_.entries) n += e.draws.size();
    return n;
  };

  if (mass > 0) {
    // First batch sized from the base stratum's per-unit variance.
    const auto& b = ledger_.entries[0];
    const double s2 = b.estimate.variance_hat * static_cast<double>(b.draws.size());
    const double budget = target - others(last);
    const double w = weight(last);
    const double want = budget > 0 ? w * w * s2 / budget : static_cast<double>(cfg_.batch_cap);
    sample_stratum(last, clamp_size(want, 2, cfg_.batch_cap));
  }
  Estimate e = ledger_.combine();
  while (!(e.moe <= cfg_.req.epsilon && units() >= cfg_.min_units)) {
    // Sample the newest stratum while it alone can close the gap; otherwise
    // the stratum with the largest variance contribution.
    std::size_t h = last;
    double budget = target - others(h);
    if (budget <= 0 || mass == 0) {
      double worst = -1;
      for (std::size_t k = 0; k < ledger_.entries.size(); ++k) {
        const double c = weight(k) * weight(k) * ledger_.entries[k].estimate.variance_hat;
        if (c > worst) {
          worst = c;
          h = k;
        }
      }
      budget = target - others(h);
    }
    const auto& s = ledger_.entries[h];
    const double n = static_cast<double>(s.draws.size());
    const double s2 = s.estimate.variance_hat * n;
    const double w = weight(h);
    const double want = budget > 0 ? w * w * s2 / budget - n : static_cast<double>(cfg_.batch_cap);
    sample_stratum(h, clamp_size(want, 1, cfg_.batch_cap));
    e = ledger_.combine();
  }
  StepReport r;
  r.version = version;
  r.clusters = v_->clusters[version];
  r.triples = v_->triples[version];
  r.estimate = e;
  r.work = annot_.take_work();
  r.step_seconds = cost_seconds(r.work, cfg_.cost);
  total_ += r.step_seconds;
  r.total_seconds = total_;
  r.units = units();
  r.satisfied = e.moe <= cfg_.req.epsilon && r.units >= cfg_.min_units;
  return r;
}

// ---------------------------------------------------------------------------

BaselineEvaluator::BaselineEvaluator(const GraphVersions& versions, EvolveConfig cfg, AnnotationBackend& backend)
    : v_(&versions), cfg_(cfg), backend_(&backend) {
  cfg_.validate();
}

StepReport BaselineEvaluator::step(std::size_t version) {
  if (version >= v_->count()) throw ValidationError("version out of range");
  SessionConfig sc;
  sc.design = {DesignKind::twcs, cfg_.m};
  sc.req = cfg_.req;
  sc.cost = cfg_.cost;
  sc.seed = Rng::derive(cfg_.seed, {kBaselineTag, version});
  sc.batch_size = cfg_.batch_size;
  sc.min_units = cfg_.min_units;
  Session s(*v_->graph, sc, "baseline", v_->frame(version));
  drive(s, *backend_);
  if (s.status() == SessionStatus::aborted) throw BackendError(s.abort_reason());
  StepReport r;
  r.version = version;
  r.clusters = v_->clusters[version];
  r.triples = v_->triples[version];
  r.estimate = s.estimate();
  last_ = s.recompute();
  r.work = s.cost().footprint;
  r.step_seconds = s.cost().seconds;
  total_ += r.step_seconds;
  r.total_seconds = total_;
  r.units = s.units();
  r.satisfied = s.status() == SessionStatus::satisfied;
  return r;
}

std::unique_ptr<EvolvingEvaluator> make_evaluator(EvolveMethod method, const GraphVersions& versions,
                                                  const EvolveConfig& cfg, AnnotationBackend& backend) {
  switch (method) {
    case EvolveMethod::baseline: return std::make_unique<BaselineEvaluator>(versions, cfg, backend);
    case EvolveMethod::rs: return std::make_unique<RsEvaluator>(versions, cfg, backend);
    case EvolveMethod::ss: return std::make_unique<SsEvaluator>(versions, cfg, backend);
  }
  throw ValidationError("unknown method");
}

}  // namespace kgacc
