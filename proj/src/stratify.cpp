#include "kgacc/stratify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "kgacc/errors.hpp"

namespace kgacc {

std::string_view to_string(StrataMethod m) noexcept {
  switch (m) {
    case StrataMethod::size_cum_sqrt_f: return "size_cum_sqrt_f";
    case StrataMethod::oracle_accuracy: return "oracle_accuracy";
    case StrataMethod::evolving_batch: return "evolving_batch";
  }
  return "?";
}

std::vector<std::vector<ClusterId>> StrataSpec::members() const {
  std::vector<std::vector<ClusterId>> out(H);
  for (ClusterId c = 0; c < membership.size(); ++c) out.at(membership[c]).push_back(c);
  return out;
}

void StrataSpec::validate() const {
  if (H < 1 || weights.size() != H) throw ValidationError("strata: weights must have H entries");
  double s = 0;
  for (double w : weights) s += w;
  if (std::abs(s - 1.0) > 1e-9) throw ValidationError("strata: weights must sum to 1");
  for (auto m : membership)
    if (m >= H) throw ValidationError("strata: membership out of range");
  for (std::size_t i = 1; i < boundaries.size(); ++i)
    if (!(boundaries[i] > boundaries[i - 1])) throw ValidationError("strata: boundaries must increase");
}

std::size_t default_strata_count(std::size_t n_clusters) noexcept { return n_clusters < 1000 ? 2 : 4; }

namespace {

// Renumbers strata 0..H'-1 in order, drops empty ones, fills weights.
void finish(StrataSpec& s, std::span<const std::uint32_t> sizes, std::size_t H) {
  std::vector<std::uint64_t> mass(H, 0);
  for (std::size_t c = 0; c < sizes.size(); ++c) mass[s.membership[c]] += sizes[c];
  std::vector<std::uint32_t> remap(H, 0);
  std::uint32_t next = 0;
  std::vector<double> bounds;
  for (std::size_t h = 0; h < H; ++h) {
    remap[h] = next;
    if (mass[h] > 0) {
      if (next > 0 && h - 1 < s.boundaries.size()) bounds.push_back(s.boundaries[h - 1]);
      ++next;
    }
  }
  for (auto& m : s.membership) m = remap[m];
  s.H = next;
  s.boundaries = std::move(bounds);
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  s.weights.clear();
  for (std::size_t h = 0; h < H; ++h)
    if (mass[h] > 0) s.weights.push_back(static_cast<double>(mass[h]) / total);
}

}  // namespace

StrataSpec cum_sqrt_f(std::span<const std::uint32_t> sizes, std::size_t H) {
  if (H < 1) throw ValidationError("H must be >= 1");
  if (sizes.empty()) throw ValidationError("empty graph");
  std::map<std::uint32_t, std::size_t> freq;
  for (auto s : sizes) freq[s]++;
  if (H > freq.size())
    throw ValidationError("H = " + std::to_string(H) + " exceeds the " + std::to_string(freq.size()) +
                          " distinct cluster sizes");
  double total = 0;
  for (const auto& [s, f] : freq) total += std::sqrt(static_cast<double>(f));
  const double tol = 1e-9 * total;
  // Stratum of each size: number of cuts at or before the start of its
  // cumulative interval.
  std::map<std::uint32_t, std::uint32_t> stratum_of;
  std::vector<double> first_size(H, 0.0);
  std::vector<bool> opened(H, false);
  double start = 0;
  for (const auto& [s, f] : freq) {
    std::uint32_t h = 0;
    for (std::size_t k = 1; k < H; ++k)
      if (total * static_cast<double>(k) / static_cast<double>(H) <= start + tol) h = static_cast<std::uint32_t>(k);
    stratum_of[s] = h;
    if (!opened[h]) {
      opened[h] = true;
      first_size[h] = s;
    }
    start += std::sqrt(static_cast<double>(f));
  }
  StrataSpec spec;
  spec.method = StrataMethod::size_cum_sqrt_f;
  spec.membership.resize(sizes.size());
  for (std::size_t c = 0; c < sizes.size(); ++c) spec.membership[c] = stratum_of[sizes[c]];
  spec.boundaries.assign(first_size.begin() + 1, first_size.end());
  finish(spec, sizes, H);
  return spec;
}

StrataSpec cum_sqrt_f(const KnowledgeGraph& g, std::size_t H) {
  const auto sizes = g.cluster_sizes();
  return cum_sqrt_f(sizes, H);
}

StrataSpec oracle_strata(const KnowledgeGraph& g, const LabelSource& ls, std::size_t H) {
  if (H < 1) throw ValidationError("H must be >= 1");
  if (!ls.covers(g)) throw ValidationError("oracle strata need labels for every triple");
  if (g.cluster_count() < H) throw ValidationError("H exceeds the number of clusters");
  const auto mu = cluster_accuracies(g, ls);
  const auto sizes = g.cluster_sizes();
  std::vector<ClusterId> order(g.cluster_count());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](ClusterId a, ClusterId b) { return mu[a] < mu[b]; });

  // Candidate cut points: indices i in order where a new group may start.
  std::size_t runs = 1;
  for (std::size_t i = 1; i < order.size(); ++i) runs += mu[order[i]] != mu[order[i - 1]];
  const bool by_run = runs >= H;
  std::vector<std::size_t> cand;  // start index of each candidate group after the first
  std::vector<double> cum_at;     // mass before cand[j]
  double mass = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 && (!by_run || mu[order[i]] != mu[order[i - 1]])) {
      cand.push_back(i);
      cum_at.push_back(mass);
    }
    mass += sizes[order[i]];
  }
  std::vector<std::size_t> cuts;
  for (std::size_t h = 1; h < H; ++h) {
    const double target = mass * static_cast<double>(h) / static_cast<double>(H);
    std::size_t best = 0;
    for (std::size_t j = 1; j < cand.size(); ++j)
      if (std::abs(cum_at[j] - target) < std::abs(cum_at[best] - target)) best = j;
    // Keep cuts strictly increasing; move forward past earlier picks.
    if (!cuts.empty()) {
      std::size_t prev = 0;
      while (prev < cand.size() && cand[prev] <= cuts.back()) ++prev;
      if (prev >= cand.size()) break;
      best = std::max(best, prev);
    }
    if (!cand.empty()) cuts.push_back(cand[best]);
  }
  StrataSpec spec;
  spec.method = StrataMethod::oracle_accuracy;
  spec.membership.assign(g.cluster_count(), 0);
  std::uint32_t h = 0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    while (next < cuts.size() && i == cuts[next]) {
      ++h;
      ++next;
      spec.boundaries.push_back(mu[order[i]]);
    }
    spec.membership[order[i]] = h;
  }
  const std::size_t used = static_cast<std::size_t>(h) + 1;
  // Accuracy boundaries may repeat under a cluster-level cut; keep them
  // non-decreasing but drop duplicates from the public list.
  finish(spec, sizes, used);
  spec.boundaries.erase(std::unique(spec.boundaries.begin(), spec.boundaries.end()), spec.boundaries.end());
  return spec;
}

std::vector<std::size_t> allocate(std::span<const double> weights, std::size_t n, std::span<const double> sd) {
  const std::size_t H = weights.size();
  if (H == 0) throw ValidationError("allocate needs at least one stratum");
  if (n < 2 * H) throw ValidationError("allocate: n must be at least 2 per stratum");
  if (!sd.empty() && sd.size() != H) throw ValidationError("allocate: sd must have one entry per stratum");
  std::vector<double> share(weights.begin(), weights.end());
  if (!sd.empty()) {
    double s = 0;
    for (std::size_t h = 0; h < H; ++h) s += weights[h] * sd[h];
    if (s > 0)
      for (std::size_t h = 0; h < H; ++h) share[h] = weights[h] * sd[h];
  }
  std::vector<bool> pinned(H, false);
  std::vector<double> ideal(H, 0.0);
  while (true) {
    double free_share = 0;
    std::size_t free_n = n;
    for (std::size_t h = 0; h < H; ++h) {
      if (pinned[h]) free_n -= 2;
      else free_share += share[h];
    }
    bool changed = false;
    for (std::size_t h = 0; h < H; ++h) {
      if (pinned[h]) {
        ideal[h] = 2.0;
        continue;
      }
      ideal[h] = free_share > 0 ? static_cast<double>(free_n) * share[h] / free_share : 0.0;
      if (ideal[h] < 2.0) {
        pinned[h] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::vector<std::size_t> out(H);
  std::size_t used = 0;
  for (std::size_t h = 0; h < H; ++h) {
    out[h] = static_cast<std::size_t>(std::floor(ideal[h] + 1e-12));
    used += out[h];
  }
  std::vector<std::size_t> order(H);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ideal[a] - std::floor(ideal[a] + 1e-12) > ideal[b] - std::floor(ideal[b] + 1e-12);
  });
  for (std::size_t i = 0; used < n; i = (i + 1) % H, ++used) out[order[i]]++;
  return out;
}

std::vector<std::size_t> allocate(const StrataSpec& spec, std::size_t n, std::span<const double> sd) {
  return allocate(spec.weights, n, sd);
}

nlohmann::json to_json(const StrataSpec& s) {
  return {{"method", to_string(s.method)},
          {"H", s.H},
          {"boundaries", s.boundaries},
          {"weights", s.weights},
          {"membership", s.membership}};
}

StrataSpec strata_from_json(const nlohmann::json& j) {
  StrataSpec s;
  const auto m = j.at("method").get<std::string>();
  if (m == "size_cum_sqrt_f") s.method = StrataMethod::size_cum_sqrt_f;
  else if (m == "oracle_accuracy") s.method = StrataMethod::oracle_accuracy;
  else if (m == "evolving_batch") s.method = StrataMethod::evolving_batch;
  else throw ValidationError("unknown strata method '" + m + "'");
  s.H = j.at("H").get<std::size_t>();
  s.boundaries = j.at("boundaries").get<std::vector<double>>();
  s.weights = j.at("weights").get<std::vector<double>>();
  s.membership = j.at("membership").get<std::vector<std::uint32_t>>();
  s.validate();
  return s;
}

}  // namespace kgacc
