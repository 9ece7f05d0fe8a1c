#include "kgacc/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "kgacc/errors.hpp"

namespace kgacc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Between-unit variance of the mean of `x`: sum (x_k - mean)^2 / (n (n-1)).
Estimate unit_mean(std::span<const double> x, double alpha) {
  if (x.empty()) throw ValidationError("estimator needs at least one unit");
  Estimate e;
  e.alpha = alpha;
  e.n_units = x.size();
  e.mu_hat = mean_of(x);
  if (x.size() == 1) {
    e.variance_hat = kInf;
  } else {
    double ss = 0;
    for (double v : x) ss += (v - e.mu_hat) * (v - e.mu_hat);
    const double n = static_cast<double>(x.size());
    e.variance_hat = ss / (n * (n - 1.0));
    e.degenerate = ss == 0.0;
  }
  finalize(e);
  return e;
}

}  // namespace

bool Estimate::variance_defined() const noexcept { return std::isfinite(variance_hat); }

void finalize(Estimate& e) {
  if (!(e.alpha > 0.0 && e.alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  e.moe = std::isfinite(e.variance_hat) ? z_critical(e.alpha) * std::sqrt(std::max(e.variance_hat, 0.0)) : kInf;
  e.ci_lo = std::clamp(e.mu_hat - e.moe, 0.0, 1.0);
  e.ci_hi = std::clamp(e.mu_hat + e.moe, 0.0, 1.0);
}

Estimate est_srs(std::span<const std::uint8_t> labels, double alpha) {
  if (labels.empty()) throw ValidationError("est_srs needs at least one label");
  Estimate e;
  e.alpha = alpha;
  e.n_units = labels.size();
  e.n_triples = labels.size();
  std::size_t ones = 0;
  for (auto l : labels) ones += l;
  const double n = static_cast<double>(labels.size());
  e.mu_hat = static_cast<double>(ones) / n;
  e.variance_hat = e.mu_hat * (1.0 - e.mu_hat) / n;
  e.degenerate = e.variance_hat == 0.0;
  finalize(e);
  return e;
}

Estimate est_rcs(std::span<const double> tau, std::size_t N, std::size_t M, double alpha) {
  if (tau.empty()) throw ValidationError("est_rcs needs at least one draw");
  if (N == 0 || M == 0) throw ValidationError("est_rcs needs a non-empty graph");
  const double scale = static_cast<double>(N) / static_cast<double>(M);
  std::vector<double> x(tau.begin(), tau.end());
  for (double& v : x) v *= scale;
  Estimate e = unit_mean(x, alpha);
  e.mu_hat = rcs_point(tau, N, M);
  finalize(e);
  return e;
}

Estimate est_wcs(std::span<const double> cluster_mu, double alpha) { return unit_mean(cluster_mu, alpha); }

Estimate est_twcs(std::span<const double> draw_mu, double alpha) { return unit_mean(draw_mu, alpha); }

Estimate est_stratified(std::span<const std::pair<double, Estimate>> strata) {
  if (strata.empty()) throw ValidationError("est_stratified needs at least one stratum");
  double wsum = 0;
  for (const auto& [w, e] : strata) {
    if (w < 0.0) throw ValidationError("stratum weight must be >= 0");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ValidationError("stratum weights must sum to 1");
  Estimate out;
  out.alpha = strata.front().second.alpha;
  out.degenerate = true;
  std::vector<std::pair<double, double>> w_mu;
  for (const auto& [w, e] : strata) {
    if (!e.variance_defined()) throw ValidationError("stratum with undefined variance");
    w_mu.emplace_back(w, e.mu_hat);
    out.variance_hat += w * w * e.variance_hat;
    out.n_units += e.n_units;
    out.n_triples += e.n_triples;
    out.footprint += e.footprint;
    out.degenerate = out.degenerate && e.degenerate;
  }
  out.mu_hat = stratified_point<double>(w_mu);
  finalize(out);
  return out;
}

SampleFootprint footprint_of(const KnowledgeGraph& g, std::span<const ClusterDraw> draws) {
  std::unordered_set<std::uint32_t> entities;
  std::unordered_set<TriplePos> triples;
  for (const auto& d : draws) {
    entities.insert(g.entity_key(d.cluster));
    triples.insert(d.triples.begin(), d.triples.end());
  }
  return {entities.size(), triples.size()};
}

Estimate estimate_draws(DesignKind kind, std::span<const ClusterDraw> draws, const KnowledgeGraph& g, double alpha) {
  for (const auto& d : draws)
    if (!d.annotated()) throw ValidationError("estimate needs annotated draws");
  Estimate e;
  switch (kind) {
    case DesignKind::srs: {
      std::vector<std::uint8_t> labels;
      for (const auto& d : draws) labels.insert(labels.end(), d.labels.begin(), d.labels.end());
      e = est_srs(labels, alpha);
      break;
    }
    case DesignKind::rcs: {
      std::vector<double> tau;
      for (const auto& d : draws) tau.push_back(static_cast<double>(d.correct()));
      e = est_rcs(tau, g.cluster_count(), g.triple_count(), alpha);
      break;
    }
    case DesignKind::wcs:
    case DesignKind::twcs:
    case DesignKind::stratified_twcs: {
      std::vector<double> mu;
      for (const auto& d : draws) mu.push_back(d.mean_label());
      e = kind == DesignKind::wcs ? est_wcs(mu, alpha) : est_twcs(mu, alpha);
      break;
    }
  }
  std::size_t t = 0;
  for (const auto& d : draws) t += d.triples.size();
  e.n_triples = t;
  e.footprint = footprint_of(g, draws);
  return e;
}

nlohmann::json to_json(const Estimate& e) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"mu_hat", e.mu_hat},
          {"variance_hat", num(e.variance_hat)},
          {"moe", num(e.moe)},
          {"ci", {e.ci_lo, e.ci_hi}},
          {"alpha", e.alpha},
          {"n_units", e.n_units},
          {"n_triples", e.n_triples},
          {"footprint", {{"unique_entities", e.footprint.unique_entities}, {"triples", e.footprint.triples}}},
          {"degenerate", e.degenerate}};
}

Estimate estimate_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) { return v.is_null() ? kInf : v.get<double>(); };
  Estimate e;
  e.mu_hat = j.at("mu_hat").get<double>();
  e.variance_hat = num(j.at("variance_hat"));
  e.alpha = j.at("alpha").get<double>();
  e.n_units = j.at("n_units").get<std::size_t>();
  e.n_triples = j.at("n_triples").get<std::size_t>();
  e.footprint.unique_entities = j.at("footprint").at("unique_entities").get<std::size_t>();
  e.footprint.triples = j.at("footprint").at("triples").get<std::size_t>();
  e.degenerate = j.at("degenerate").get<bool>();
  finalize(e);
  return e;
}

}  // namespace kgacc
