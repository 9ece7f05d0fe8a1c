#pragma once

// Knowledge graph storage: triples grouped into entity clusters.
//
// Triple positions are assigned in ingestion order and never change when the
// graph grows, so labels keyed by position stay valid across delta batches.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgacc {

using TriplePos = std::uint32_t;
using ClusterId = std::uint32_t;

enum class ObjectKind : std::uint8_t { entity = 0, data = 1 };

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  ObjectKind object_kind = ObjectKind::data;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct EntityCluster {
  std::string entity_id;
  std::uint32_t batch_id = 0;       // 0 for the base graph; delta batch id otherwise
  std::vector<TriplePos> triples;   // ingestion order

  std::size_t size() const noexcept { return triples.size(); }
  friend bool operator==(const EntityCluster&, const EntityCluster&) = default;
};

struct DeltaGroup {
  std::string entity_id;
  std::vector<Triple> triples;
};

// Insertion-only update batch, grouped by subject (first-appearance order).
struct DeltaBatch {
  std::uint32_t batch_id = 1;
  std::vector<DeltaGroup> groups;

  std::size_t triple_count() const noexcept;
  void validate() const;

  static DeltaBatch group(std::uint32_t batch_id, std::vector<Triple> triples);
};

enum class DeltaMode { merge, independent };
enum class GraphFormat { tsv, ntriples };

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Groups by subject; cluster order is first appearance of the subject.
  static KnowledgeGraph from_triples(std::vector<Triple> triples);

  std::span<const Triple> triples() const noexcept { return triples_; }
  const Triple& triple(TriplePos pos) const { return triples_.at(pos); }
  std::span<const EntityCluster> clusters() const noexcept { return clusters_; }
  const EntityCluster& cluster(ClusterId id) const { return clusters_.at(id); }

  std::size_t cluster_count() const noexcept { return clusters_.size(); }
  std::size_t triple_count() const noexcept { return triples_.size(); }
  std::size_t entity_count() const noexcept { return entities_.size(); }
  bool empty() const noexcept { return triples_.empty(); }

  ClusterId cluster_of(TriplePos pos) const { return owner_.at(pos); }
  std::uint32_t cluster_size(ClusterId id) const { return static_cast<std::uint32_t>(clusters_[id].size()); }

  // Dense index of the cluster's entity id; clusters split by independent
  // deltas share it. Used to count distinct entities for the cost model.
  std::uint32_t entity_key(ClusterId id) const { return cluster_entity_[id]; }

  std::optional<ClusterId> find(std::string_view entity_id, std::uint32_t batch_id = 0) const;
  std::vector<std::uint32_t> cluster_sizes() const;

  // CRC-32 of the canonical snapshot payload.
  std::uint32_t checksum() const;

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.triples_ == b.triples_ && a.clusters_ == b.clusters_;
  }

 private:
  friend KnowledgeGraph apply_delta(const KnowledgeGraph&, const DeltaBatch&, DeltaMode);
  friend KnowledgeGraph read_snapshot(std::istream&);

  struct EntityRecord {
    std::uint32_t key = 0;
    std::vector<ClusterId> clusters;
  };

  ClusterId add_cluster(const std::string& entity_id, std::uint32_t batch_id);
  void append_triple(ClusterId cluster, Triple t);

  std::vector<Triple> triples_;
  std::vector<EntityCluster> clusters_;
  std::vector<ClusterId> owner_;
  std::vector<std::uint32_t> cluster_entity_;
  std::unordered_map<std::string, EntityRecord> entities_;
};

struct GraphStats {
  std::size_t clusters = 0;
  std::size_t triples = 0;
  double mean_cluster_size = 0.0;
  std::map<std::size_t, std::size_t> size_histogram;
};

// TSV columns: subject, predicate, object[, object_kind][, label]. Blank lines
// and lines starting with '#' are skipped. Without an object_kind column an
// object is an entity iff it occurs as a subject somewhere in the file.
KnowledgeGraph parse_graph(std::istream& in, GraphFormat format = GraphFormat::tsv);
KnowledgeGraph ingest(const std::filesystem::path& path, GraphFormat format = GraphFormat::tsv);

KnowledgeGraph apply_delta(const KnowledgeGraph& g, const DeltaBatch& d, DeltaMode mode);
DeltaBatch read_delta(const std::filesystem::path& path, std::uint32_t batch_id);

GraphStats stats(const KnowledgeGraph& g);

// Snapshot format (all integers little-endian):
//   "KGACCSNP" | u32 version | u64 payload_len | payload | u32 crc32(payload)
// payload:
//   u64 n_triples, then per triple: str subject, str predicate, str object, u8 kind
//   u64 n_clusters, then per cluster: str entity_id, u32 batch_id, u64 n, u32 pos[n]
// where str = u32 length + bytes.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(const KnowledgeGraph& g, std::ostream& out);
KnowledgeGraph read_snapshot(std::istream& in);
void snapshot(const KnowledgeGraph& g, const std::filesystem::path& path);
KnowledgeGraph restore(const std::filesystem::path& path);

std::string_view to_string(ObjectKind kind) noexcept;

}  // namespace kgacc
