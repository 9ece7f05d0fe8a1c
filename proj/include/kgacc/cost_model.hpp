#pragma once

// Annotation cost model and design-level cost minimization.
//
//   cost = |E'| * c1 + |G'| * c2   (seconds)
//
// c1 is the average time to identify an entity, c2 the average time to
// validate one triple of an identified entity.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "kgacc/kg_store.hpp"
#include "kgacc/labelgen.hpp"

namespace kgacc {

struct CostParams {
  double c1 = 45.0;
  double c2 = 25.0;

  void validate() const;
};

struct SampleFootprint {
  std::size_t unique_entities = 0;
  std::size_t triples = 0;

  SampleFootprint& operator+=(const SampleFootprint& o) noexcept {
    unique_entities += o.unique_entities;
    triples += o.triples;
    return *this;
  }
  friend SampleFootprint operator+(SampleFootprint a, const SampleFootprint& b) noexcept { return a += b; }
  friend bool operator==(const SampleFootprint&, const SampleFootprint&) = default;
};

struct Requirement {
  double epsilon = 0.05;
  double alpha = 0.05;

  void validate() const;
  double z() const;  // z_{alpha/2}
};

// Inverse standard normal CDF. Acklam's rational approximation followed by
// one Halley step on erfc; absolute error below 1e-12 on (1e-300, 1).
double normal_quantile(double p);
double z_critical(double alpha);

double cost_seconds(const SampleFootprint& fp, const CostParams& cp) noexcept;
inline double cost_hours(const SampleFootprint& fp, const CostParams& cp) noexcept {
  return cost_seconds(fp, cp) / 3600.0;
}

struct CostObservation {
  double unique_entities = 0.0;
  double triples = 0.0;
  double seconds = 0.0;
};

// Least squares with c1, c2 >= 0: the unconstrained solution when both are
// positive, otherwise the better single-parameter fit with the other clipped
// to zero. Throws ValidationError on a rank-deficient design or when no
// positive solution exists.
CostParams fit_params(std::span<const CostObservation> obs);

// CSV with header "entities,triples,seconds".
std::vector<CostObservation> read_observations(std::istream& in);
std::vector<CostObservation> read_observations(const std::filesystem::path& path);
// "c1=<v>\nc2=<v>\n"
void write_params(const CostParams& cp, std::ostream& out);
CostParams read_params(std::istream& in);

// Sum_i (1 - (1 - M_i/M)^n_s). Exact for with-replacement triple draws; an
// approximation for SRS without replacement.
double expected_unique_entities(std::span<const std::uint32_t> cluster_sizes, std::size_t n_s);
double expected_unique_entities(const KnowledgeGraph& g, std::size_t n_s);

// ceil(mu(1-mu) z^2 / eps^2); at mu in {0,1} the variance term becomes
// 1/(4 * current_n).
std::size_t srs_required_n(double mu_hat, const Requirement& req, std::size_t current_n = 1);

// Per-cluster sizes and accuracies used to evaluate V(m).
struct AccuracyProfile {
  std::vector<std::uint32_t> sizes;
  std::vector<double> mu;  // mu_i

  double overall() const;  // sum M_i mu_i / M

  static AccuracyProfile from_labels(const KnowledgeGraph& g, const LabelSource& ls);
  // mu_i = 0.5 everywhere: the largest within-cluster variance.
  static AccuracyProfile constant(std::span<const std::uint32_t> sizes, double mu = 0.5);
  // Observed cluster means where available, `fallback` elsewhere.
  static AccuracyProfile from_pilot(std::span<const std::uint32_t> sizes,
                                    const std::unordered_map<ClusterId, double>& observed, double fallback);
};

// Single-draw variance of the two-stage estimator:
//   V(m) = (1/M)[ sum M_i (mu_i - mu)^2
//                 + (1/m) sum_{M_i > m} (M_i - m)/(M_i - 1) M_i mu_i (1 - mu_i) ]
// `mu` defaults to the profile's overall accuracy.
double twcs_variance(const AccuracyProfile& profile, std::uint32_t m);
double twcs_variance(const AccuracyProfile& profile, std::uint32_t m, double mu);

struct MChoice {
  std::uint32_t m = 1;
  std::size_t n = 0;       // required first-stage draws
  double variance = 0.0;   // V(m)
  double cost = 0.0;       // n * (c1 + m c2), seconds
};

struct OptimalM {
  MChoice best;
  std::vector<MChoice> sweep;  // one entry per m in range
};

// Linear search over m in [m_min, m_max]; n(m) = ceil(V(m) z^2 / eps^2);
// ties go to the smaller m.
OptimalM optimal_m(const AccuracyProfile& profile, const Requirement& req, const CostParams& cp,
                   std::uint32_t m_min = 1, std::uint32_t m_max = 20);

}  // namespace kgacc
