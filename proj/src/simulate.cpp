#include "kgacc/simulate.hpp"

#include <cmath>
#include <ostream>

#include "kgacc/errors.hpp"
#include "kgacc/rng.hpp"

namespace kgacc::sim {

namespace {

constexpr std::uint64_t kScenarioTag = 0x5ce7;

template <class F>
Summary summarize(std::size_t n, F&& value) {
  std::vector<double> xs;
  xs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) xs.push_back(value(i));
  return Summary::of(xs);
}

}  // namespace

Summary Summary::of(std::span<const double> xs) {
  Summary s;
  s.count = xs.size();
  if (xs.empty()) return s;
  // Welford
  double mean = 0, m2 = 0;
  std::size_t k = 0;
  s.min = s.max = xs.front();
  for (double x : xs) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = mean;
  s.sd = k > 1 ? std::sqrt(m2 / static_cast<double>(k - 1)) : 0.0;
  return s;
}

nlohmann::json Summary::to_json() const {
  return {{"count", count}, {"mean", mean}, {"sd", sd}, {"min", min}, {"max", max}};
}

unsigned default_threads() noexcept { return std::max(1u, std::thread::hardware_concurrency()); }

// --- static -------------------------------------------------------------------

bool StaticTrial::sound(const SessionConfig& cfg) const noexcept {
  return status == SessionStatus::satisfied && recomputed.moe <= cfg.req.epsilon && units >= cfg.min_units;
}

Summary StaticTrials::estimates() const {
  return summarize(trials.size(), [&](std::size_t i) { return trials[i].estimate.mu_hat; });
}

Summary StaticTrials::hours() const {
  return summarize(trials.size(), [&](std::size_t i) { return trials[i].cost.hours(); });
}

Summary StaticTrials::units() const {
  return summarize(trials.size(), [&](std::size_t i) { return static_cast<double>(trials[i].units); });
}

std::size_t StaticTrials::unsound() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [&](const StaticTrial& t) { return !t.sound(config); }));
}

nlohmann::json StaticTrials::to_json() const {
  return {{"config", kgacc::to_json(config)},
          {"trials", trials.size()},
          {"true_accuracy", true_mu},
          {"estimate", estimates().to_json()},
          {"hours", hours().to_json()},
          {"units", units().to_json()},
          {"unsound", unsound()}};
}

StaticTrials static_trials(const KnowledgeGraph& g, const LabelSource& labels, const SessionConfig& cfg,
                           std::size_t trials, std::uint64_t root_seed, unsigned threads) {
  cfg.validate();
  StaticTrials out;
  out.config = cfg;
  out.config.seed = root_seed;
  out.true_mu = true_accuracy(g, labels);
  out.trials = parallel_trials<StaticTrial>(trials, threads, [&](std::size_t t) {
    SessionConfig c = cfg;
    c.seed = Rng::derive(root_seed, {t});
    OracleBackend backend(labels);
    auto r = run_static(g, c, backend);
    StaticTrial st;
    st.estimate = r.estimate;
    st.recomputed = r.session->recompute();
    st.cost = r.cost;
    st.units = r.session->units();
    st.status = r.session->status();
    return st;
  });
  return out;
}

// --- m sweep ------------------------------------------------------------------

std::vector<SweepRow> m_sweep(const KnowledgeGraph& g, const LabelSource& labels, const SessionConfig& cfg,
                              std::uint32_t m_lo, std::uint32_t m_hi, std::size_t trials, std::uint64_t root_seed,
                              unsigned threads) {
  if (m_lo < 1 || m_hi < m_lo) throw ValidationError("sweep range must satisfy 1 <= m_lo <= m_hi");
  const auto profile = AccuracyProfile::from_labels(g, labels);
  const auto opt = optimal_m(profile, cfg.req, cfg.cost, m_lo, m_hi);
  std::vector<SweepRow> rows;
  for (const auto& mc : opt.sweep) {
    SweepRow row;
    row.m = mc.m;
    row.predicted_n = mc.n;
    row.predicted_hours = mc.cost / 3600.0;
    if (trials > 0) {
      SessionConfig c = cfg;
      c.design = {DesignKind::twcs, mc.m};
      const auto st = static_trials(g, labels, c, trials, Rng::derive(root_seed, {mc.m}), threads);
      row.hours = st.hours();
      row.estimate = st.estimates();
    }
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out) {
  out << "m,predicted_n,predicted_hours,sim_mean_hours,sim_sd_hours,sim_mean_estimate\n";
  out.precision(10);
  for (const auto& r : rows)
    out << r.m << ',' << r.predicted_n << ',' << r.predicted_hours << ',' << r.hours.mean << ',' << r.hours.sd << ','
        << r.estimate.mean << '\n';
}

// --- evolving -----------------------------------------------------------------

void ScenarioSpec::validate() const {
  if (base_triples == 0) throw ValidationError("base_triples must be > 0");
  for (double r : {base_error, delta_error})
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("error rates must be in [0,1]");
  if (!(existing_share >= 0.0 && existing_share <= 1.0)) throw ValidationError("existing_share must be in [0,1]");
  for (auto t : delta_triples)
    if (t == 0) throw ValidationError("delta batches must be non-empty");
}

std::unique_ptr<Scenario> build_scenario(const ScenarioSpec& spec) {
  spec.validate();
  auto sc = std::make_unique<Scenario>();
  const auto sizes = synth::draw_sizes_for_triples(spec.base_triples, spec.profile, Rng::derive(spec.seed, {kScenarioTag, 0}));
  sc->graph = synth::build_graph(sizes);
  sc->labels = gen_rem(sc->graph, spec.base_error, Rng::derive(spec.seed, {kScenarioTag, 1}));
  std::vector<std::size_t> marks{sc->graph.cluster_count()};
  for (std::size_t k = 0; k < spec.delta_triples.size(); ++k) {
    const auto batch_id = static_cast<std::uint32_t>(k + 1);
    const auto d = synth::build_delta(sc->graph, spec.delta_triples[k], batch_id, spec.existing_share, spec.profile,
                                      Rng::derive(spec.seed, {kScenarioTag, 2, batch_id}));
    sc->graph = apply_delta(sc->graph, d, DeltaMode::independent);
    extend_rem(sc->labels, sc->graph, spec.delta_error, Rng::derive(spec.seed, {kScenarioTag, 3, batch_id}));
    marks.push_back(sc->graph.cluster_count());
  }
  sc->versions = GraphVersions::from_marks(sc->graph, marks);
  for (std::size_t k = 0; k < sc->versions.count(); ++k)
    sc->true_accuracy.push_back(prefix_accuracy(sc->labels, sc->versions.triples[k]));
  return sc;
}

Summary EvolvingTrials::estimate_at(std::size_t version) const {
  return summarize(runs.size(), [&](std::size_t i) { return runs[i].steps.at(version).estimate.mu_hat; });
}

Summary EvolvingTrials::step_hours_at(std::size_t version) const {
  return summarize(runs.size(), [&](std::size_t i) { return runs[i].steps.at(version).step_seconds / 3600.0; });
}

Summary EvolvingTrials::total_hours() const {
  return summarize(runs.size(), [&](std::size_t i) { return runs[i].total_seconds() / 3600.0; });
}

Summary EvolvingTrials::update_hours() const {
  return summarize(runs.size(), [&](std::size_t i) { return runs[i].update_seconds() / 3600.0; });
}

std::size_t EvolvingTrials::unsound_steps() const {
  std::size_t bad = 0;
  for (const auto& r : runs)
    for (std::size_t k = 0; k < r.steps.size(); ++k)
      if (!(r.recomputed.at(k).moe <= config.req.epsilon && r.steps[k].units >= config.min_units)) ++bad;
  return bad;
}

nlohmann::json EvolvingTrials::to_json() const {
  nlohmann::json steps_j = nlohmann::json::array();
  for (std::size_t k = 0; k < steps(); ++k)
    steps_j.push_back({{"version", k},
                       {"true_accuracy", true_accuracy[k]},
                       {"estimate", estimate_at(k).to_json()},
                       {"step_hours", step_hours_at(k).to_json()}});
  return {{"method", to_string(method)},
          {"config", kgacc::to_json(config)},
          {"trials", runs.size()},
          {"total_hours", total_hours().to_json()},
          {"update_hours", update_hours().to_json()},
          {"unsound_steps", unsound_steps()},
          {"steps", steps_j}};
}

EvolvingTrials evolving_trials(const Scenario& sc, EvolveMethod method, const EvolveConfig& cfg, std::size_t trials,
                               std::uint64_t root_seed, unsigned threads) {
  cfg.validate();
  EvolvingTrials out;
  out.method = method;
  out.config = cfg;
  out.config.seed = root_seed;
  out.true_accuracy = sc.true_accuracy;
  out.runs = parallel_trials<EvolvingRun>(trials, threads, [&](std::size_t t) {
    EvolveConfig c = cfg;
    c.seed = Rng::derive(root_seed, {t});
    OracleBackend backend(sc.labels);
    return run_evolving(sc.versions, method, c, backend);
  });
  return out;
}

void write_evolving_csv(const EvolvingTrials& t, std::ostream& out) {
  out << "version,true_mu,mean_mu_hat,sd_mu_hat,mean_moe,mean_step_hours,mean_total_hours\n";
  out.precision(10);
  for (std::size_t k = 0; k < t.steps(); ++k) {
    const auto est = t.estimate_at(k);
    const auto moe = summarize(t.runs.size(), [&](std::size_t i) { return t.runs[i].steps[k].estimate.moe; });
    const auto step = t.step_hours_at(k);
    const auto total =
        summarize(t.runs.size(), [&](std::size_t i) { return t.runs[i].steps[k].total_seconds / 3600.0; });
    out << k << ',' << t.true_accuracy[k] << ',' << est.mean << ',' << est.sd << ',' << moe.mean << ',' << step.mean
        << ',' << total.mean << '\n';
  }
}

}  // namespace kgacc::sim
