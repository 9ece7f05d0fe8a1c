#pragma once

// The static evaluation loop: draw a batch, collect labels, re-estimate, stop
// once MoE <= epsilon with at least `min_units` primary units.
//
// A Session is a step-wise state machine so that the blocking driver
// (run_static) and the HTTP service can share it:
//
//   sampling --next_batch--> awaiting_annotations --complete_batch--> sampling
//                                                                 \-> satisfied
//
// Labels are cached by triple position: a triple is requested at most once
// per session even when a cluster is drawn repeatedly.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kgacc/annotation.hpp"
#include "kgacc/cost_model.hpp"
#include "kgacc/estimators.hpp"
#include "kgacc/samplers.hpp"
#include "kgacc/stratify.hpp"

namespace kgacc {

enum class SessionStatus { sampling, awaiting_annotations, satisfied, aborted };

std::string_view to_string(SessionStatus s) noexcept;

struct SessionConfig {
  SamplingDesign design;
  Requirement req;
  CostParams cost;
  std::uint64_t seed = 1;
  std::size_t batch_size = 10;   // primary units per iteration
  std::size_t min_units = 30;    // the stopping rule is suppressed below this
  std::size_t max_units = 1000000;
  std::size_t strata = 0;        // stratified designs: H (0 = by cluster count)

  void validate() const;
};

nlohmann::json to_json(const SessionConfig& c);
SessionConfig session_config_from_json(const nlohmann::json& j);

struct CostReport {
  SampleFootprint footprint;
  double seconds = 0.0;
  double hours() const noexcept { return seconds / 3600.0; }
};

class Session {
 public:
  // `frame` restricts cluster draws to a sub-population (for example a past
  // graph version); by default the whole graph.
  Session(const KnowledgeGraph& g, SessionConfig cfg, std::string id = "session",
          std::optional<ClusterFrame> frame = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  const SessionConfig& config() const noexcept { return cfg_; }
  SessionStatus status() const noexcept { return status_; }
  const std::string& abort_reason() const noexcept { return abort_reason_; }
  const Estimate& estimate() const noexcept { return estimate_; }
  bool has_estimate() const noexcept { return batches_ > 0; }
  std::size_t batches() const noexcept { return batches_; }
  std::size_t units() const noexcept;
  const KnowledgeGraph& graph() const noexcept { return *g_; }
  std::uint32_t graph_checksum() const;

  // All draws so far, labels attached. For stratified designs, per stratum.
  const std::vector<ClusterDraw>& draws() const noexcept { return draws_; }
  const std::vector<std::vector<ClusterDraw>>& stratum_draws() const noexcept { return stratum_draws_; }
  const std::optional<StrataSpec>& strata() const noexcept { return strata_; }

  // Draws the next batch. Returns one request per cluster with the triples
  // that have no cached label yet (possibly none).
  std::vector<AnnotationRequest> next_batch();
  // The open requests of the pending batch (labels not yet submitted).
  std::vector<AnnotationRequest> pending_requests() const;

  // Records a label. Re-submitting the same label is a no-op; a different
  // label for a cached position throws ValidationError.
  void submit(TriplePos pos, std::uint8_t label);
  void submit(const AnnotationRequest& req, std::span<const std::uint8_t> labels);
  bool batch_complete() const;

  // Attaches labels to the pending batch, re-estimates and applies the
  // stopping rule.
  const Estimate& complete_batch();

  void abort(std::string reason);

  CostReport cost() const;

  // Estimate recomputed from the archived draws (same floor as the loop).
  Estimate recompute() const;

  // Seeds, config, batch count and label cache. Resuming replays the batches
  // deterministically from the seed and reuses every cached label.
  nlohmann::json archive() const;
  static Session resume(const KnowledgeGraph& g, const nlohmann::json& archive);

 private:
  Estimate estimate_from(const std::vector<ClusterDraw>& draws,
                         const std::vector<std::vector<ClusterDraw>>& strata) const;
  std::vector<AnnotationRequest> requests_for(const std::vector<ClusterDraw>& batch, bool missing_only) const;

  const KnowledgeGraph* g_;
  SessionConfig cfg_;
  std::string id_;
  mutable std::optional<std::uint32_t> checksum_;
  SessionStatus status_ = SessionStatus::sampling;
  std::string abort_reason_;
  Estimate estimate_;
  std::size_t batches_ = 0;

  ClusterFrame frame_;
  std::optional<SrsStream> srs_;
  std::optional<StrataSpec> strata_;
  std::vector<ClusterFrame> stratum_frames_;

  std::vector<ClusterDraw> draws_;
  std::vector<std::vector<ClusterDraw>> stratum_draws_;
  std::vector<ClusterDraw> pending_;
  std::vector<std::uint32_t> pending_stratum_;
  std::unordered_map<TriplePos, std::uint8_t> labels_;
};

// Zero empirical variance is replaced by 1/(4 n^2), i.e. mu(1-mu) -> 1/(4n),
// so that a run of identical labels cannot stop the loop by itself.
void apply_variance_floor(Estimate& e);

struct StaticResult {
  Estimate estimate;
  CostReport cost;
  std::unique_ptr<Session> session;
};

// Blocking loop against a backend. A BackendError aborts the session (the
// archive stays resumable) instead of propagating.
StaticResult run_static(const KnowledgeGraph& g, const SessionConfig& cfg, AnnotationBackend& backend);
// Continues an existing session until it stops.
void drive(Session& s, AnnotationBackend& backend);

}  // namespace kgacc
