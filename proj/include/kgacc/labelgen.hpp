#pragma once

// Triple correctness labels f(t) in {0,1}, indexed by triple position.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "kgacc/kg_store.hpp"

namespace kgacc {

enum class LabelProvenance { fixture, rem, bmm };

// Size-dependent accuracy: p_i = 0.5 + eps if M_i < k, else
// sigmoid(c * (M_i - k)) + eps, with eps ~ N(0, sigma^2) drawn once per
// cluster and p_i clamped to [0, 1].
struct BmmParams {
  std::uint32_t k = 3;
  double c = 0.01;
  double sigma = 0.1;

  void validate() const;
};

struct LabelSource {
  std::vector<std::uint8_t> labels;
  LabelProvenance provenance = LabelProvenance::fixture;
  std::uint64_t seed = 0;
  double r_eps = 0.0;  // rem only
  BmmParams bmm;       // bmm only

  std::size_t size() const noexcept { return labels.size(); }
  std::uint8_t operator[](TriplePos pos) const { return labels[pos]; }
  bool covers(const KnowledgeGraph& g) const noexcept { return labels.size() >= g.triple_count(); }
};

// Per-cluster streams: cluster i draws from Rng::stream(seed, tag, i), so the
// labels of existing clusters do not move when the graph grows.
LabelSource gen_rem(const KnowledgeGraph& g, double r_eps, std::uint64_t seed);
LabelSource gen_bmm(const KnowledgeGraph& g, const BmmParams& p, std::uint64_t seed);

// Labels the positions of `g` not yet covered by `ls` (triples appended by a
// delta batch) with error rate `r_eps`. Existing labels are kept.
void extend_rem(LabelSource& ls, const KnowledgeGraph& g, double r_eps, std::uint64_t seed);

double bmm_probability(std::uint32_t cluster_size, const BmmParams& p, double eps) noexcept;

// Sum of labels over M. Throws ValidationError listing (up to 10) missing
// positions when `ls` does not cover `g`.
double true_accuracy(const KnowledgeGraph& g, const LabelSource& ls);

// Accuracy over the first `triple_count` positions (a graph version prefix).
double prefix_accuracy(const LabelSource& ls, std::size_t triple_count);

std::vector<double> cluster_accuracies(const KnowledgeGraph& g, const LabelSource& ls);

// Reads the label column of a graph TSV (last column, "0/1/true/false").
// Positions follow file order, matching ingest(). A record without a label
// is a ParseError.
LabelSource read_fixture_labels(const std::filesystem::path& path);

// Label file: "# graph_checksum=<crc>" header, then "position\tlabel" rows.
void write_labels(const LabelSource& ls, const KnowledgeGraph& g, std::ostream& out);
void write_labels(const LabelSource& ls, const KnowledgeGraph& g, const std::filesystem::path& path);
// Throws ChecksumError when the header does not match `g`.
LabelSource read_labels(std::istream& in, const KnowledgeGraph& g);
LabelSource read_labels(const std::filesystem::path& path, const KnowledgeGraph& g);

}  // namespace kgacc
