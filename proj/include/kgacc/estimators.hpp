#pragma once

// Point estimates, variance, margin of error and confidence intervals.
//
// moe = z_{alpha/2} * sqrt(variance_hat). With a single primary unit the
// between-unit variance is undefined; such estimates carry moe = +inf so a
// stopping rule can never fire on them.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kgacc/cost_model.hpp"
#include "kgacc/samplers.hpp"

namespace kgacc {

struct Estimate {
  double mu_hat = 0.0;
  double variance_hat = 0.0;
  double moe = 0.0;
  double ci_lo = 0.0;  // reported interval, clipped to [0, 1]
  double ci_hi = 0.0;
  double alpha = 0.05;
  std::size_t n_units = 0;
  std::size_t n_triples = 0;
  SampleFootprint footprint;
  bool degenerate = false;  // zero empirical variance

  bool variance_defined() const noexcept;
  // Unclipped interval.
  std::pair<double, double> raw_ci() const noexcept { return {mu_hat - moe, mu_hat + moe}; }
};

// Point estimators over any field type: double in the engine, exact
// rationals in the enumeration checks.
template <class T>
T mean_of(std::span<const T> x) {
  T sum{};
  for (const T& v : x) sum += v;
  return sum / T(static_cast<long long>(x.size()));
}

// N/(M n) * sum tau_k
template <class T>
T rcs_point(std::span<const T> tau, std::size_t N, std::size_t M) {
  T sum{};
  for (const T& v : tau) sum += v;
  return T(static_cast<long long>(N)) * sum /
         (T(static_cast<long long>(M)) * T(static_cast<long long>(tau.size())));
}

// sum W_h mu_h over (W_h, mu_h) pairs.
template <class T>
T stratified_point(std::span<const std::pair<T, T>> w_mu) {
  T sum{};
  for (const auto& [w, mu] : w_mu) sum += w * mu;
  return sum;
}

// Fills moe and the clipped interval from mu_hat, variance_hat and alpha.
void finalize(Estimate& e);

// Sample mean of triple labels; variance mu(1-mu)/n.
Estimate est_srs(std::span<const std::uint8_t> labels, double alpha);

// mu_r = N/(M n) sum tau_k, where tau_k is the number of correct triples in
// draw k; variance sum((N/M) tau_k - mu_r)^2 / (n (n-1)).
Estimate est_rcs(std::span<const double> tau, std::size_t N, std::size_t M, double alpha);

// Hansen-Hurwitz mean of cluster accuracies; variance
// sum(mu_k - mu_w)^2 / (n (n-1)).
Estimate est_wcs(std::span<const double> cluster_mu, double alpha);

// Mean of per-draw second-stage means, same variance form as est_wcs.
Estimate est_twcs(std::span<const double> draw_mu, double alpha);

// sum W_h mu_h with variance sum W_h^2 var_h. Weights must sum to 1 within
// 1e-9 and every stratum needs a defined variance.
Estimate est_stratified(std::span<const std::pair<double, Estimate>> strata);

// Estimate from annotated draws under the batch design.
Estimate estimate_draws(DesignKind kind, std::span<const ClusterDraw> draws, const KnowledgeGraph& g, double alpha);

// Footprint of a set of draws: distinct entities (by entity id) and distinct
// triples.
SampleFootprint footprint_of(const KnowledgeGraph& g, std::span<const ClusterDraw> draws);

nlohmann::json to_json(const Estimate& e);
Estimate estimate_from_json(const nlohmann::json& j);

}  // namespace kgacc
