#pragma once

// Incremental evaluation of an evolving graph.
//
// All procedures work on the final graph of an update stream built in
// independent mode: every delta group is its own cluster, appended after the
// clusters of earlier versions. Version k is then the prefix of the first
// clusters[k] clusters (and triples[k] triples), so a past version is a
// ClusterFrame slice and no graph copy is needed.
//
//   RS       weighted reservoir over all clusters seen so far; each update
//            annotates only newly admitted clusters, then grows the reservoir
//            until MoE <= epsilon.
//   SS       one stratum per version increment; each update samples only its
//            own stratum and reuses every earlier annotation.
//   baseline a fresh static evaluation of every version.
//
// Cost per step counts the triples annotated in that step and the distinct
// entities they belong to.

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kgacc/annotation.hpp"
#include "kgacc/estimators.hpp"
#include "kgacc/samplers.hpp"
#include "kgacc/session.hpp"

namespace kgacc {

struct GraphVersions {
  const KnowledgeGraph* graph = nullptr;
  std::vector<std::size_t> clusters;  // cluster count of version k
  std::vector<std::size_t> triples;   // triple count of version k

  // `cluster_marks` must be increasing and end at most at g.cluster_count().
  static GraphVersions from_marks(const KnowledgeGraph& g, std::vector<std::size_t> cluster_marks);
  std::size_t count() const noexcept { return clusters.size(); }
  ClusterFrame frame(std::size_t version) const;
  ClusterFrame increment(std::size_t version) const;  // clusters new in `version`

 private:
  ClusterFrame all_;
};

enum class EvolveMethod { baseline, rs, ss };

std::string_view to_string(EvolveMethod m) noexcept;
EvolveMethod parse_evolve_method(std::string_view name);

struct EvolveConfig {
  std::uint32_t m = 3;
  Requirement req;
  CostParams cost;
  std::uint64_t seed = 1;
  std::size_t batch_size = 10;  // base evaluation and baseline batches
  std::size_t min_units = 30;
  std::size_t batch_cap = 30;   // largest adaptive batch within one update
  bool refresh_base = false;    // SS: re-draw the base stratum at every update

  void validate() const;
};

nlohmann::json to_json(const EvolveConfig& c);

struct StepReport {
  std::size_t version = 0;
  std::size_t clusters = 0;
  std::size_t triples = 0;
  Estimate estimate;
  SampleFootprint work;       // annotation work of this step
  double step_seconds = 0.0;
  double total_seconds = 0.0; // cumulative, including the base
  std::size_t units = 0;      // primary units behind the estimate
  bool satisfied = false;     // MoE <= epsilon and units >= min_units
};

nlohmann::json to_json(const StepReport& r);

// Shared label cache and per-step work accounting.
class Annotator {
 public:
  Annotator(const KnowledgeGraph& g, AnnotationBackend& backend) : g_(&g), backend_(&backend) {}

  // Labels `draws` in place, requesting only uncached triples.
  void label(std::vector<ClusterDraw*> draws);
  SampleFootprint take_work();  // work since the last call
  std::size_t cached() const noexcept { return cache_.size(); }

 private:
  const KnowledgeGraph* g_;
  AnnotationBackend* backend_;
  std::unordered_map<TriplePos, std::uint8_t> cache_;
  std::size_t work_triples_ = 0;
  std::vector<std::uint32_t> work_entities_;
};

class EvolvingEvaluator {
 public:
  virtual ~EvolvingEvaluator() = default;
  // Evaluates version 0; then step(k) for k = 1, 2, ... in order.
  virtual StepReport base() = 0;
  virtual StepReport step(std::size_t version) = 0;
  // Estimate of the latest step recomputed from the archived draws.
  virtual Estimate recompute() const = 0;
};

class RsEvaluator final : public EvolvingEvaluator {
 public:
  RsEvaluator(const GraphVersions& versions, EvolveConfig cfg, AnnotationBackend& backend);

  StepReport base() override;
  StepReport step(std::size_t version) override;
  Estimate recompute() const override { return current(); }

  const ReservoirState& reservoir() const noexcept { return res_; }
  // Annotated draws of the current members, in descending key order.
  std::vector<ClusterDraw> pool() const;
  std::size_t admissions() const noexcept { return admissions_; }

 private:
  void annotate_members();
  Estimate current() const;
  StepReport finish(std::size_t version, bool grow_fixed);

  const GraphVersions* v_;
  EvolveConfig cfg_;
  Annotator annot_;
  ReservoirState res_;
  std::unordered_map<ClusterId, ClusterDraw> drawn_;
  std::size_t admissions_ = 0;
  double total_ = 0.0;
};

struct StratumEntry {
  std::string label;           // "G" for the base, "D<k>" for increment k
  std::size_t version = 0;
  std::uint64_t mass = 0;      // triples in the stratum
  std::vector<ClusterDraw> draws;
  Estimate estimate;
  std::uint32_t batches = 0;
};

struct StratumLedger {
  std::vector<StratumEntry> entries;

  std::uint64_t mass() const noexcept;
  // Combination of all strata with W_h = mass_h / mass().
  Estimate combine() const;
  nlohmann::json to_json() const;
};

class SsEvaluator final : public EvolvingEvaluator {
 public:
  SsEvaluator(const GraphVersions& versions, EvolveConfig cfg, AnnotationBackend& backend);

  StepReport base() override;
  StepReport step(std::size_t version) override;
  Estimate recompute() const override { return ledger_.combine(); }

  const StratumLedger& ledger() const noexcept { return ledger_; }

 private:
  void evaluate_base(std::uint64_t seed);
  void sample_stratum(std::size_t h, std::size_t n);

  const GraphVersions* v_;
  EvolveConfig cfg_;
  Annotator annot_;
  StratumLedger ledger_;
  std::vector<ClusterFrame> frames_;  // frame of each ledger entry
  double total_ = 0.0;
};

class BaselineEvaluator final : public EvolvingEvaluator {
 public:
  BaselineEvaluator(const GraphVersions& versions, EvolveConfig cfg, AnnotationBackend& backend);

  StepReport base() override { return step(0); }
  StepReport step(std::size_t version) override;
  Estimate recompute() const override { return last_; }

 private:
  const GraphVersions* v_;
  EvolveConfig cfg_;
  AnnotationBackend* backend_;
  Estimate last_;
  double total_ = 0.0;
};

std::unique_ptr<EvolvingEvaluator> make_evaluator(EvolveMethod method, const GraphVersions& versions,
                                                  const EvolveConfig& cfg, AnnotationBackend& backend);

}  // namespace kgacc
