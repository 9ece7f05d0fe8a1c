#pragma once

// Seeded multi-trial experiments: repeated static evaluations, cost-vs-m
// sweeps, and evolving scenarios with per-step traces.
//
// Trial t uses seed Rng::derive(root_seed, {t}). Results are stored by trial
// index, so every summary is independent of the number of worker threads.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kgacc/labelgen.hpp"
#include "kgacc/orchestrator.hpp"
#include "kgacc/session.hpp"
#include "kgacc/synth.hpp"

namespace kgacc::sim {

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;

  static Summary of(std::span<const double> xs);
  nlohmann::json to_json() const;
};

unsigned default_threads() noexcept;

// Calls f(t) for t in [0, trials) on up to `threads` workers and returns the
// results in trial order. The first exception thrown by any trial is
// rethrown after all workers stop.
template <class R, class F>
std::vector<R> parallel_trials(std::size_t trials, unsigned threads, F&& f) {
  std::vector<R> out(trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) {
      try {
        out[t] = f(t);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = trials;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(trials, 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// --- static trials ----------------------------------------------------------

struct StaticTrial {
  Estimate estimate;
  Estimate recomputed;
  CostReport cost;
  std::size_t units = 0;
  SessionStatus status = SessionStatus::sampling;

  // Terminated normally with recomputed MoE <= epsilon and enough units.
  bool sound(const SessionConfig& cfg) const noexcept;
};

struct StaticTrials {
  SessionConfig config;
  double true_mu = 0.0;
  std::vector<StaticTrial> trials;

  Summary estimates() const;
  Summary hours() const;
  Summary units() const;
  std::size_t unsound() const;
  nlohmann::json to_json() const;
};

StaticTrials static_trials(const KnowledgeGraph& g, const LabelSource& labels, const SessionConfig& cfg,
                           std::size_t trials, std::uint64_t root_seed, unsigned threads);

// --- cost vs m --------------------------------------------------------------

struct SweepRow {
  std::uint32_t m = 0;
  std::size_t predicted_n = 0;   // clusters needed under the variance model
  double predicted_hours = 0.0;  // modeled cost of that sample size
  Summary hours;                 // simulated, when trials > 0
  Summary estimate;
};

// TWCS at m = m_lo..m_hi. The prediction uses the true per-cluster accuracies
// of `labels`; `trials` simulated sessions per m (0 skips simulation).
std::vector<SweepRow> m_sweep(const KnowledgeGraph& g, const LabelSource& labels, const SessionConfig& cfg,
                              std::uint32_t m_lo, std::uint32_t m_hi, std::size_t trials, std::uint64_t root_seed,
                              unsigned threads);

// CSV: m,predicted_n,predicted_hours,sim_mean_hours,sim_sd_hours,sim_mean_estimate
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& out);

// --- evolving scenarios -----------------------------------------------------

struct ScenarioSpec {
  std::size_t base_triples = 100000;
  synth::SizeProfile profile;
  double base_error = 0.1;                 // REM error rate of the base graph
  std::vector<std::size_t> delta_triples;  // one entry per update batch
  double delta_error = 0.1;
  double existing_share = 0.3;             // share of delta groups enriching known entities
  std::uint64_t seed = 1;

  void validate() const;
};

// The final graph of the stream, built in independent mode, with labels and
// the version marks. Not movable: `versions` points into `graph`.
struct Scenario {
  KnowledgeGraph graph;
  LabelSource labels;
  GraphVersions versions;
  std::vector<double> true_accuracy;  // per version

  Scenario() = default;
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;
};

std::unique_ptr<Scenario> build_scenario(const ScenarioSpec& spec);

struct EvolvingTrials {
  EvolveMethod method = EvolveMethod::ss;
  EvolveConfig config;
  std::vector<double> true_accuracy;
  std::vector<EvolvingRun> runs;

  std::size_t steps() const noexcept { return true_accuracy.size(); }
  Summary estimate_at(std::size_t version) const;
  Summary step_hours_at(std::size_t version) const;
  Summary total_hours() const;
  Summary update_hours() const;  // all steps after the base
  // Steps whose recomputed MoE exceeds epsilon or that have too few units.
  std::size_t unsound_steps() const;
  nlohmann::json to_json() const;
};

EvolvingTrials evolving_trials(const Scenario& sc, EvolveMethod method, const EvolveConfig& cfg, std::size_t trials,
                               std::uint64_t root_seed, unsigned threads);

// CSV: version,true_mu,mean_mu_hat,sd_mu_hat,mean_moe,mean_step_hours,mean_total_hours
void write_evolving_csv(const EvolvingTrials& t, std::ostream& out);

}  // namespace kgacc::sim
