#pragma once

// Synthetic graph structure for desk-scale experiments. Only the cluster-size
// profile matters to the samplers; triple text is filler with stable ids.

#include <cstdint>
#include <span>
#include <vector>

#include "kgacc/kg_store.hpp"

namespace kgacc::synth {

// Long-tailed entity sizes: 1 + floor(X), X ~ LogNormal. `mean` is the target
// mean cluster size. The defaults give a MOVIE-like profile (mean ~9.2).
struct SizeProfile {
  double mean = 9.2;
  double log_sigma = 1.6;
  std::uint32_t max_size = 100000;
};

std::vector<std::uint32_t> draw_sizes(std::size_t n_clusters, const SizeProfile& profile, std::uint64_t seed);

// Draws clusters until at least `target_triples` triples exist; the last
// cluster is truncated so the total is exact.
std::vector<std::uint32_t> draw_sizes_for_triples(std::size_t target_triples, const SizeProfile& profile,
                                                  std::uint64_t seed);

// Entities are named "<prefix><index>"; objects alternate between entity
// references and literals.
KnowledgeGraph build_graph(std::span<const std::uint32_t> sizes, std::string_view prefix = "e");

// An update batch of exactly `target_triples` triples. A fraction
// `existing_share` of the groups enrich entities already in `base`; the rest
// introduce new entities named "<prefix><batch_id>_<k>".
DeltaBatch build_delta(const KnowledgeGraph& base, std::size_t target_triples, std::uint32_t batch_id,
                       double existing_share, const SizeProfile& profile, std::uint64_t seed,
                       std::string_view prefix = "u");

}  // namespace kgacc::synth
