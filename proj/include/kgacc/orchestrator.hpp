#pragma once

// Drivers over whole update streams and report writers.

#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "kgacc/evolve.hpp"
#include "kgacc/session.hpp"

namespace kgacc {

struct EvolvingRun {
  EvolveMethod method = EvolveMethod::ss;
  std::vector<StepReport> steps;  // steps[0] is the base version
  std::vector<Estimate> recomputed;  // per step, from the archived draws

  double total_seconds() const noexcept { return steps.empty() ? 0.0 : steps.back().total_seconds; }
  // Cost of all updates, excluding the base evaluation.
  double update_seconds() const noexcept;
};

// Evaluates version 0, then every later version in order. With a single
// version the result is the base estimate alone.
EvolvingRun run_evolving(const GraphVersions& versions, EvolveMethod method, const EvolveConfig& cfg,
                         AnnotationBackend& backend);

// CSV: version,clusters,triples,mu_hat,moe,units,new_entities,new_triples,step_hours,total_hours
void write_trace_csv(const EvolvingRun& run, std::ostream& out);

nlohmann::json static_report(const Session& s);

}  // namespace kgacc
