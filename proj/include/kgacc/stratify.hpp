#pragma once

// Partitioning clusters into strata and allocating draws across them.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kgacc/kg_store.hpp"
#include "kgacc/labelgen.hpp"

namespace kgacc {

enum class StrataMethod { size_cum_sqrt_f, oracle_accuracy, evolving_batch };

std::string_view to_string(StrataMethod m) noexcept;

struct StrataSpec {
  StrataMethod method = StrataMethod::size_cum_sqrt_f;
  std::size_t H = 1;
  // size_cum_sqrt_f: smallest cluster size of strata 2..H.
  // oracle_accuracy: smallest mu_i of strata 2..H.
  std::vector<double> boundaries;
  std::vector<double> weights;             // W_h = triples in h / M
  std::vector<std::uint32_t> membership;   // cluster -> stratum

  std::vector<std::vector<ClusterId>> members() const;
  void validate() const;
};

// Two strata below 1000 clusters, four otherwise.
std::size_t default_strata_count(std::size_t n_clusters) noexcept;

// Cumulative square root of frequency over the cluster-size histogram, cut
// into H equal-width intervals. A size whose interval straddles a cut goes to
// the lower stratum; a size starting exactly at a cut opens the upper one.
// Empty strata are dropped. Throws ValidationError when H exceeds the number
// of distinct sizes.
StrataSpec cum_sqrt_f(std::span<const std::uint32_t> cluster_sizes, std::size_t H);
StrataSpec cum_sqrt_f(const KnowledgeGraph& g, std::size_t H);

// Clusters ordered by accuracy and cut into H groups of about equal triple
// mass. Cuts fall between runs of equal accuracy when there are at least H
// runs, otherwise between clusters.
StrataSpec oracle_strata(const KnowledgeGraph& g, const LabelSource& ls, std::size_t H);

// Neyman allocation n_h ~ W_h * sd_h when `sd` is given and not all zero,
// else proportional n_h ~ W_h. Every stratum gets at least 2; strata whose
// share falls below the floor are pinned to it and the rest re-split; the
// remainder goes by largest fractional part. Throws when n < 2H.
std::vector<std::size_t> allocate(std::span<const double> weights, std::size_t n, std::span<const double> sd = {});
std::vector<std::size_t> allocate(const StrataSpec& spec, std::size_t n, std::span<const double> sd = {});

nlohmann::json to_json(const StrataSpec& s);
StrataSpec strata_from_json(const nlohmann::json& j);

}  // namespace kgacc
