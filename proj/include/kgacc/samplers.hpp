#pragma once

// Sampling designs over entity clusters and the weighted reservoir.
//
// Randomness: every draw k of batch b uses Rng::stream(seed, b, k), so a
// batch is a pure function of (graph, design, seed, batch_index) and batches
// never share randomness.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kgacc/kg_store.hpp"
#include "kgacc/rng.hpp"

namespace kgacc {

enum class DesignKind { srs, rcs, wcs, twcs, stratified_twcs };

std::string_view to_string(DesignKind kind) noexcept;
DesignKind parse_design_kind(std::string_view name);

struct SamplingDesign {
  DesignKind kind = DesignKind::twcs;
  std::uint32_t m = 5;  // second-stage size, two-stage designs only

  void validate() const;
  // Triples annotated per drawn cluster of size `size`.
  std::uint32_t take(std::uint32_t size) const noexcept;
};

struct ClusterDraw {
  ClusterId cluster = 0;
  std::uint32_t cluster_size = 0;
  std::vector<TriplePos> triples;      // distinct, ascending
  std::vector<std::uint8_t> labels;    // empty until annotated; aligned with triples

  bool annotated() const noexcept { return !triples.empty() && labels.size() == triples.size(); }
  double mean_label() const;
  std::size_t correct() const;
};

struct DrawBatch {
  SamplingDesign design;
  std::uint64_t seed = 0;
  std::uint32_t batch_index = 0;
  std::vector<ClusterDraw> draws;

  std::size_t triple_count() const noexcept;
};

// A population of clusters to draw from: the whole graph, a prefix (a past
// graph version), a contiguous range (one delta batch in independent mode), or
// an explicit subset (a stratum). Prefix and range frames share one
// cumulative-size table.
class ClusterFrame {
 public:
  ClusterFrame() = default;

  static ClusterFrame whole(const KnowledgeGraph& g);
  static ClusterFrame range(const KnowledgeGraph& g, ClusterId first, ClusterId last);
  static ClusterFrame subset(const KnowledgeGraph& g, std::vector<ClusterId> members);
  // Re-slices an existing frame's table without rebuilding it.
  ClusterFrame slice(ClusterId first, ClusterId last) const;

  std::size_t size() const noexcept;
  std::uint64_t weight() const noexcept;  // triples in the frame
  ClusterId member(std::size_t i) const;
  bool empty() const noexcept { return size() == 0; }

  ClusterId pick_pps(Rng& rng) const;      // P(i) = M_i / weight()
  ClusterId pick_uniform(Rng& rng) const;  // P(i) = 1 / size()

 private:
  std::shared_ptr<const std::vector<std::uint64_t>> cum_;  // cum_[i] = sum of sizes before i
  std::vector<ClusterId> members_;                          // subset frames only
  ClusterId first_ = 0, last_ = 0;                          // range frames
};

// Simple random sample of n_s triples without replacement (Floyd), grouped by
// cluster. Throws ValidationError when n_s > M.
DrawBatch srs_draw(const KnowledgeGraph& g, std::size_t n_s, std::uint64_t seed, std::uint32_t batch_index = 0);

// n uniform cluster draws with replacement, all triples of each.
DrawBatch rcs_draw(const KnowledgeGraph& g, std::size_t n, std::uint64_t seed, std::uint32_t batch_index = 0);
DrawBatch rcs_draw(const KnowledgeGraph& g, const ClusterFrame& frame, std::size_t n, std::uint64_t seed,
                   std::uint32_t batch_index = 0);

// n size-proportional cluster draws with replacement, all triples of each.
DrawBatch wcs_draw(const KnowledgeGraph& g, std::size_t n, std::uint64_t seed, std::uint32_t batch_index = 0);
DrawBatch wcs_draw(const KnowledgeGraph& g, const ClusterFrame& frame, std::size_t n, std::uint64_t seed,
                   std::uint32_t batch_index = 0);

// First stage as wcs_draw; then min(M_i, m) triples without replacement inside
// each drawn cluster, independently per draw.
DrawBatch twcs_draw(const KnowledgeGraph& g, std::size_t n, std::uint32_t m, std::uint64_t seed,
                    std::uint32_t batch_index = 0);
DrawBatch twcs_draw(const KnowledgeGraph& g, const ClusterFrame& frame, std::size_t n, std::uint32_t m,
                    std::uint64_t seed, std::uint32_t batch_index = 0);

// k distinct positions of `cluster`, uniformly among k-subsets (Floyd).
std::vector<TriplePos> subsample(const KnowledgeGraph& g, ClusterId cluster, std::uint32_t k, Rng& rng);

// Sequential SRS without replacement across batches. Each next() call
// continues the same sample: the union of all calls is a uniform subset.
class SrsStream {
 public:
  SrsStream(const KnowledgeGraph& g, std::uint64_t seed) : g_(&g), seed_(seed) {}

  DrawBatch next(std::size_t count, std::uint32_t batch_index);
  std::size_t drawn() const noexcept { return taken_.size(); }

 private:
  const KnowledgeGraph* g_;
  std::uint64_t seed_;
  std::unordered_set<TriplePos> taken_;
};

// TSV task export: entity_id, cluster, position, subject, predicate, object.
void write_tasks(const KnowledgeGraph& g, const DrawBatch& batch, std::ostream& out);

// ---------------------------------------------------------------------------
// Weighted reservoir (A-Res). Cluster i of weight w_i gets key
// k_i = u_i^(1/w_i); the reservoir holds the `capacity` largest keys among the
// clusters seen so far. Keys are stored as log k_i = log(u_i) / w_i.
//
// u_i comes from Rng::stream(seed, tag, i), so the reservoir after any update
// sequence depends only on the seed and the clusters seen.

struct ReservoirEntry {
  ClusterId cluster = 0;
  double log_key = 0.0;
  std::uint64_t seq = 0;  // admission order; the older entry loses a tie
};

double reservoir_log_key(std::uint64_t seed, ClusterId cluster, std::uint32_t weight) noexcept;

struct ReservoirUpdate;

class ReservoirState {
 public:
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return heap_.size(); }
  std::size_t clusters_seen() const noexcept { return seen_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t admissions() const noexcept { return admissions_; }

  // Smallest key in the reservoir (-inf when empty).
  double min_log_key() const noexcept;
  bool contains(ClusterId c) const { return members_.count(c) != 0; }
  // Members ordered by descending key.
  std::vector<ReservoirEntry> entries() const;
  std::vector<ClusterId> members() const;
  std::uint64_t member_weight() const noexcept { return member_weight_; }

 private:
  friend ReservoirState reservoir_seed(const KnowledgeGraph&, std::size_t, std::uint64_t, std::size_t);
  friend ReservoirUpdate reservoir_update(const ReservoirState&, const KnowledgeGraph&, std::size_t);
  friend std::vector<ClusterId> reservoir_grow(ReservoirState&, const KnowledgeGraph&, std::size_t);

  void push(const KnowledgeGraph& g, ClusterId c, double log_key);
  ReservoirEntry pop_min(const KnowledgeGraph& g);
  void offer_waitlist(ClusterId c, double log_key);
  void rebuild_waitlist(const KnowledgeGraph& g);

  std::size_t capacity_ = 0;
  std::size_t seen_ = 0;
  std::uint64_t seed_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t admissions_ = 0;
  std::uint64_t member_weight_ = 0;
  std::vector<ReservoirEntry> heap_;  // min-key on top
  std::unordered_set<ClusterId> members_;
  // Largest keys among non-members, and the bound below which the waitlist is
  // complete: every seen non-member with log_key > floor_ is in waitlist_.
  std::multimap<double, ClusterId, std::greater<>> waitlist_;
  double floor_ = 0.0;
};

// Keys all clusters in [0, cluster_limit) (default: all) and keeps the
// `capacity` largest. Throws ValidationError when capacity < 1 or the graph is
// empty.
ReservoirState reservoir_seed(const KnowledgeGraph& g, std::size_t capacity, std::uint64_t seed,
                              std::size_t cluster_limit = static_cast<std::size_t>(-1));

struct ReservoirUpdate {
  ReservoirState state;
  std::vector<ClusterId> admitted;  // members now that were not before
  std::vector<ClusterId> evicted;   // members before that are not now
  std::size_t admissions = 0;       // admission events, counting transient ones
};

// Offers the clusters appended since the state was last updated (positions
// [clusters_seen, cluster_limit), i.e. the groups of a delta batch applied in
// independent mode) in arrival order. A group whose key exceeds the current
// minimum evicts the minimum-key entry.
ReservoirUpdate reservoir_update(const ReservoirState& state, const KnowledgeGraph& g,
                                 std::size_t cluster_limit = static_cast<std::size_t>(-1));

// Raises capacity by `extra` and admits the next-largest keys among seen
// non-members. The result equals seeding with the larger capacity.
std::vector<ClusterId> reservoir_grow(ReservoirState& state, const KnowledgeGraph& g, std::size_t extra);

}  // namespace kgacc
