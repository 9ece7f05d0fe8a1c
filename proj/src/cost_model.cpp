#include "kgacc/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>

#include "kgacc/errors.hpp"
#include "tsv.hpp"

namespace kgacc {

void CostParams::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ValidationError("cost params must be positive (c1 > 0, c2 > 0)");
}

void Requirement::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must be in (0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
}

double Requirement::z() const { return z_critical(alpha); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must be in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double z_critical(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  return normal_quantile(1.0 - alpha / 2.0);
}

double cost_seconds(const SampleFootprint& fp, const CostParams& cp) noexcept {
  return static_cast<double>(fp.unique_entities) * cp.c1 + static_cast<double>(fp.triples) * cp.c2;
}

CostParams fit_params(std::span<const CostObservation> obs) {
  if (obs.size() < 2) throw ValidationError("cost fit needs at least 2 observations (rank-deficient)");
  double see = 0, seg = 0, sgg = 0, ses = 0, sgs = 0;
  for (const auto& o : obs) {
    see += o.unique_entities * o.unique_entities;
    seg += o.unique_entities * o.triples;
    sgg += o.triples * o.triples;
    ses += o.unique_entities * o.seconds;
    sgs += o.triples * o.seconds;
  }
  const double det = see * sgg - seg * seg;
  if (std::abs(det) <= 1e-12 * std::max(1.0, see * sgg))
    throw ValidationError("cost fit is rank-deficient: observations are collinear");
  CostParams cp{(ses * sgg - sgs * seg) / det, (see * sgs - seg * ses) / det};
  if (cp.c1 > 0.0 && cp.c2 > 0.0) return cp;

  auto sse = [&](double c1, double c2) {
    double s = 0;
    for (const auto& o : obs) {
      const double r = c1 * o.unique_entities + c2 * o.triples - o.seconds;
      s += r * r;
    }
    return s;
  };
  const double only_c1 = see > 0 ? ses / see : -1.0;
  const double only_c2 = sgg > 0 ? sgs / sgg : -1.0;
  const bool ok1 = only_c1 > 0.0, ok2 = only_c2 > 0.0;
  if (!ok1 && !ok2) throw ValidationError("cost fit has no positive solution");
  if (ok1 && (!ok2 || sse(only_c1, 0) <= sse(0, only_c2))) return {only_c1, 0.0};
  return {0.0, only_c2};
}

std::vector<CostObservation> read_observations(std::istream& in) {
  std::vector<CostObservation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    const auto f = detail::split(detail::trim(line), ',');
    if (f.size() != 3) throw ParseError("expected entities,triples,seconds", lineno);
    if (detail::trim(f[0]) == "entities") continue;
    try {
      out.push_back({std::stod(std::string(f[0])), std::stod(std::string(f[1])), std::stod(std::string(f[2]))});
    } catch (const std::exception&) {
      throw ParseError("bad number", lineno);
    }
  }
  return out;
}

std::vector<CostObservation> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_observations(in);
}

void write_params(const CostParams& cp, std::ostream& out) {
  out.precision(17);
  out << "c1=" << cp.c1 << "\nc2=" << cp.c2 << '\n';
}

CostParams read_params(std::istream& in) {
  CostParams cp{-1, -1};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
    const auto key = detail::trim(std::string_view(line).substr(0, eq));
    double v = 0;
    try {
      v = std::stod(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw ParseError("bad number", lineno);
    }
    if (key == "c1") cp.c1 = v;
    else if (key == "c2") cp.c2 = v;
    else throw ParseError("unknown key", lineno);
  }
  cp.validate();
  return cp;
}

double expected_unique_entities(std::span<const std::uint32_t> sizes, std::size_t n_s) {
  double total = 0;
  for (auto s : sizes) total += s;
  if (static_cast<double>(n_s) > total) throw ValidationError("n_s exceeds the number of triples");
  if (n_s == 0) return 0.0;
  double e = 0;
  const double n = static_cast<double>(n_s);
  for (auto s : sizes) e += -std::expm1(n * std::log1p(-static_cast<double>(s) / total));
  return e;
}

double expected_unique_entities(const KnowledgeGraph& g, std::size_t n_s) {
  const auto sizes = g.cluster_sizes();
  return expected_unique_entities(sizes, n_s);
}

std::size_t srs_required_n(double mu_hat, const Requirement& req, std::size_t current_n) {
  if (!(mu_hat >= 0.0 && mu_hat <= 1.0)) throw ValidationError("mu_hat must be in [0,1]");
  req.validate();
  double v = mu_hat * (1.0 - mu_hat);
  if (mu_hat == 0.0 || mu_hat == 1.0) v = 1.0 / (4.0 * static_cast<double>(std::max<std::size_t>(current_n, 1)));
  const double z = req.z();
  return static_cast<std::size_t>(std::ceil(v * z * z / (req.epsilon * req.epsilon)));
}

double AccuracyProfile::overall() const {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    num += sizes[i] * mu[i];
    den += sizes[i];
  }
  if (den == 0) throw ValidationError("empty accuracy profile");
  return num / den;
}

AccuracyProfile AccuracyProfile::from_labels(const KnowledgeGraph& g, const LabelSource& ls) {
  return {g.cluster_sizes(), cluster_accuracies(g, ls)};
}

AccuracyProfile AccuracyProfile::constant(std::span<const std::uint32_t> sizes, double mu) {
  return {std::vector<std::uint32_t>(sizes.begin(), sizes.end()), std::vector<double>(sizes.size(), mu)};
}

AccuracyProfile AccuracyProfile::from_pilot(std::span<const std::uint32_t> sizes,
                                            const std::unordered_map<ClusterId, double>& observed,
                                            double fallback) {
  AccuracyProfile p = constant(sizes, fallback);
  for (const auto& [id, mu] : observed)
    if (id < p.mu.size()) p.mu[id] = mu;
  return p;
}

namespace {

// Sufficient statistics for V(m): the between-cluster term and the
// within-cluster mass grouped by cluster size.
struct VarianceTerms {
  double total = 0;
  double between = 0;
  std::map<std::uint32_t, double> within;  // size -> sum M_i mu_i (1 - mu_i)
};

VarianceTerms terms(const AccuracyProfile& p, double mu) {
  if (p.sizes.size() != p.mu.size() || p.sizes.empty()) throw ValidationError("malformed accuracy profile");
  VarianceTerms t;
  for (std::size_t i = 0; i < p.sizes.size(); ++i) {
    const double s = p.sizes[i];
    t.total += s;
    t.between += s * (p.mu[i] - mu) * (p.mu[i] - mu);
    if (p.sizes[i] > 1) t.within[p.sizes[i]] += s * p.mu[i] * (1.0 - p.mu[i]);
  }
  return t;
}

double variance_at(const VarianceTerms& t, std::uint32_t m) {
  double w = 0;
  for (auto it = t.within.upper_bound(m); it != t.within.end(); ++it) {
    const double s = it->first;
    w += (s - m) / (s - 1.0) * it->second;
  }
  return (t.between + w / m) / t.total;
}

}  // namespace

double twcs_variance(const AccuracyProfile& profile, std::uint32_t m) {
  return twcs_variance(profile, m, profile.overall());
}

double twcs_variance(const AccuracyProfile& profile, std::uint32_t m, double mu) {
  if (m < 1) throw ValidationError("m must be >= 1");
  return variance_at(terms(profile, mu), m);
}

OptimalM optimal_m(const AccuracyProfile& profile, const Requirement& req, const CostParams& cp,
                   std::uint32_t m_min, std::uint32_t m_max) {
  if (m_min < 1 || m_max < m_min) throw ValidationError("empty m range");
  req.validate();
  if (!(cp.c1 >= 0.0 && cp.c2 >= 0.0)) throw ValidationError("cost params must be non-negative");
  const auto t = terms(profile, profile.overall());
  const double z = req.z();
  OptimalM out;
  out.best.cost = std::numeric_limits<double>::infinity();
  for (std::uint32_t m = m_min; m <= m_max; ++m) {
    MChoice c;
    c.m = m;
    c.variance = variance_at(t, m);
    c.n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(c.variance * z * z / (req.epsilon * req.epsilon))));
    c.cost = static_cast<double>(c.n) * (cp.c1 + m * cp.c2);
    out.sweep.push_back(c);
    if (c.cost < out.best.cost) out.best = c;
  }
  return out;
}

}  // namespace kgacc
