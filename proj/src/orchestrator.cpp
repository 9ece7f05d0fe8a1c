#include "kgacc/orchestrator.hpp"

#include <ostream>

namespace kgacc {

double EvolvingRun::update_seconds() const noexcept {
  return steps.empty() ? 0.0 : steps.back().total_seconds - steps.front().step_seconds;
}

EvolvingRun run_evolving(const GraphVersions& versions, EvolveMethod method, const EvolveConfig& cfg,
                         AnnotationBackend& backend) {
  EvolvingRun run;
  run.method = method;
  auto ev = make_evaluator(method, versions, cfg, backend);
  run.steps.push_back(ev->base());
  run.recomputed.push_back(ev->recompute());
  for (std::size_t k = 1; k < versions.count(); ++k) {
    run.steps.push_back(ev->step(k));
    run.recomputed.push_back(ev->recompute());
  }
  return run;
}

void write_trace_csv(const EvolvingRun& run, std::ostream& out) {
  out << "version,clusters,triples,mu_hat,moe,units,new_entities,new_triples,step_hours,total_hours\n";
  out.precision(10);
  for (const auto& s : run.steps)
    out << s.version << ',' << s.clusters << ',' << s.triples << ',' << s.estimate.mu_hat << ',' << s.estimate.moe
        << ',' << s.units << ',' << s.work.unique_entities << ',' << s.work.triples << ',' << s.step_seconds / 3600.0
        << ',' << s.total_seconds / 3600.0 << '\n';
}

nlohmann::json static_report(const Session& s) {
  nlohmann::json j = {{"session", s.id()},
                      {"status", to_string(s.status())},
                      {"config", to_json(s.config())},
                      {"units", s.units()},
                      {"batches", s.batches()}};
  if (s.has_estimate()) {
    j["estimate"] = to_json(s.estimate());
    const auto c = s.cost();
    j["cost"] = {{"unique_entities", c.footprint.unique_entities},
                 {"triples", c.footprint.triples},
                 {"seconds", c.seconds},
                 {"hours", c.hours()}};
  }
  if (s.status() == SessionStatus::aborted) j["abort_reason"] = s.abort_reason();
  if (s.strata()) j["strata"] = {{"H", s.strata()->H}, {"weights", s.strata()->weights}, {"boundaries", s.strata()->boundaries}};
  return j;
}

}  // namespace kgacc
