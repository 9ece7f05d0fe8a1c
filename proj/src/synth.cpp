#include "kgacc/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "kgacc/errors.hpp"
#include "kgacc/rng.hpp"

namespace kgacc::synth {

namespace {

constexpr std::array<const char*, 8> kPredicates = {"type",     "name",       "related_to", "located_in",
                                                    "member_of", "created_on", "described_by", "has_part"};

std::uint32_t one_size(Rng& rng, const SizeProfile& p) {
  // E[1 + floor(X)] ~= E[X] + 0.5 for a smooth X.
  const double mu = std::log(std::max(p.mean - 0.5, 0.5)) - 0.5 * p.log_sigma * p.log_sigma;
  const double x = std::exp(rng.normal(mu, p.log_sigma));
  const double s = 1.0 + std::floor(x);
  return static_cast<std::uint32_t>(std::min<double>(s, p.max_size));
}

Triple filler(const std::string& subject, std::uint32_t k, std::string_view prefix) {
  Triple t;
  t.subject = subject;
  t.predicate = kPredicates[k % kPredicates.size()];
  if (k % 2 == 0) {
    t.object = std::string(prefix) + std::to_string(k * 7919u % 1000u);
    t.object_kind = ObjectKind::entity;
  } else {
    t.object = "v" + std::to_string(k);
    t.object_kind = ObjectKind::data;
  }
  return t;
}

}  // namespace

std::vector<std::uint32_t> draw_sizes(std::size_t n_clusters, const SizeProfile& profile, std::uint64_t seed) {
  if (profile.mean < 1.0 || profile.log_sigma < 0.0) throw ValidationError("invalid size profile");
  Rng rng = Rng::stream(seed, 0x51e5);
  std::vector<std::uint32_t> sizes(n_clusters);
  for (auto& s : sizes) s = one_size(rng, profile);
  return sizes;
}

std::vector<std::uint32_t> draw_sizes_for_triples(std::size_t target_triples, const SizeProfile& profile,
                                                  std::uint64_t seed) {
  if (profile.mean < 1.0 || profile.log_sigma < 0.0) throw ValidationError("invalid size profile");
  Rng rng = Rng::stream(seed, 0x51e5);
  std::vector<std::uint32_t> sizes;
  std::size_t total = 0;
  while (total < target_triples) {
    auto s = one_size(rng, profile);
    s = static_cast<std::uint32_t>(std::min<std::size_t>(s, target_triples - total));
    sizes.push_back(s);
    total += s;
  }
  return sizes;
}

KnowledgeGraph build_graph(std::span<const std::uint32_t> sizes, std::string_view prefix) {
  std::vector<Triple> triples;
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  triples.reserve(total);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw ValidationError("cluster size must be >= 1");
    const std::string subject = std::string(prefix) + std::to_string(i);
    for (std::uint32_t k = 0; k < sizes[i]; ++k) triples.push_back(filler(subject, k, prefix));
  }
  return KnowledgeGraph::from_triples(std::move(triples));
}

DeltaBatch build_delta(const KnowledgeGraph& base, std::size_t target_triples, std::uint32_t batch_id,
                       double existing_share, const SizeProfile& profile, std::uint64_t seed,
                       std::string_view prefix) {
  if (existing_share < 0.0 || existing_share > 1.0) throw ValidationError("existing_share must be in [0,1]");
  Rng rng = Rng::stream(seed, 0xde17a, batch_id);
  DeltaBatch d;
  d.batch_id = batch_id;
  std::vector<char> used(base.entity_count(), 0);
  std::size_t total = 0;
  std::size_t fresh = 0;
  std::size_t used_count = 0;
  while (total < target_triples) {
    auto s = static_cast<std::uint32_t>(std::min<std::size_t>(one_size(rng, profile), target_triples - total));
    std::string entity;
    if (used_count < base.entity_count() && rng.uniform() < existing_share) {
      const auto c = static_cast<ClusterId>(rng.below(base.cluster_count()));
      const auto key = base.entity_key(c);
      if (used[key]) continue;  // one group per entity and batch
      used[key] = 1;
      ++used_count;
      entity = base.cluster(c).entity_id;
    } else {
      entity = std::string(prefix) + std::to_string(batch_id) + "_" + std::to_string(fresh++);
    }
    DeltaGroup g{entity, {}};
    for (std::uint32_t k = 0; k < s; ++k) {
      auto t = filler(entity, k + 1000, prefix);
      g.triples.push_back(std::move(t));
    }
    d.groups.push_back(std::move(g));
    total += s;
  }
  return d;
}

}  // namespace kgacc::synth
