#include "kgacc/labelgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "kgacc/errors.hpp"
#include "kgacc/rng.hpp"
#include "tsv.hpp"

namespace kgacc {

namespace {

constexpr std::uint64_t kRemTag = 0x7e3;
constexpr std::uint64_t kBmmTag = 0xb33;

}  // namespace

void BmmParams::validate() const {
  if (k < 1) throw ValidationError("bmm: k must be >= 1");
  if (!(c >= 0.0)) throw ValidationError("bmm: c must be >= 0");
  if (!(sigma >= 0.0)) throw ValidationError("bmm: sigma must be >= 0");
}

double bmm_probability(std::uint32_t cluster_size, const BmmParams& p, double eps) noexcept {
  double base = 0.5;
  if (cluster_size >= p.k) base = 1.0 / (1.0 + std::exp(-p.c * (static_cast<double>(cluster_size) - p.k)));
  return std::clamp(base + eps, 0.0, 1.0);
}

LabelSource gen_rem(const KnowledgeGraph& g, double r_eps, std::uint64_t seed) {
  if (!(r_eps >= 0.0 && r_eps <= 1.0)) throw ValidationError("r_eps must be in [0,1]");
  LabelSource ls;
  ls.provenance = LabelProvenance::rem;
  ls.seed = seed;
  ls.r_eps = r_eps;
  ls.labels.assign(g.triple_count(), 1);
  for (ClusterId c = 0; c < g.cluster_count(); ++c) {
    Rng rng = Rng::stream(seed, kRemTag, c);
    for (TriplePos pos : g.cluster(c).triples) ls.labels[pos] = rng.uniform() < r_eps ? 0 : 1;
  }
  return ls;
}

void extend_rem(LabelSource& ls, const KnowledgeGraph& g, double r_eps, std::uint64_t seed) {
  if (!(r_eps >= 0.0 && r_eps <= 1.0)) throw ValidationError("r_eps must be in [0,1]");
  const std::size_t old = ls.labels.size();
  if (g.triple_count() <= old) return;
  ls.labels.resize(g.triple_count(), 1);
  // New positions form a suffix; visit the clusters that own them.
  std::vector<char> seen(g.cluster_count(), 0);
  for (std::size_t pos = old; pos < g.triple_count(); ++pos) {
    const ClusterId c = g.cluster_of(static_cast<TriplePos>(pos));
    if (seen[c]) continue;
    seen[c] = 1;
    // Continue the cluster's own stream past its existing triples, so the
    // result equals gen_rem on the grown graph.
    Rng rng = Rng::stream(seed, kRemTag, c);
    for (TriplePos p : g.cluster(c).triples) {
      const bool bad = rng.uniform() < r_eps;
      if (p >= old) ls.labels[p] = bad ? 0 : 1;
    }
  }
}

LabelSource gen_bmm(const KnowledgeGraph& g, const BmmParams& p, std::uint64_t seed) {
  p.validate();
  LabelSource ls;
  ls.provenance = LabelProvenance::bmm;
  ls.seed = seed;
  ls.bmm = p;
  ls.labels.assign(g.triple_count(), 1);
  for (ClusterId c = 0; c < g.cluster_count(); ++c) {
    Rng rng = Rng::stream(seed, kBmmTag, c);
    const double eps = p.sigma > 0.0 ? rng.normal(0.0, p.sigma) : 0.0;
    const double prob = bmm_probability(g.cluster_size(c), p, eps);
    for (TriplePos pos : g.cluster(c).triples) ls.labels[pos] = rng.uniform() < prob ? 1 : 0;
  }
  return ls;
}

double true_accuracy(const KnowledgeGraph& g, const LabelSource& ls) {
  if (g.empty()) throw ValidationError("empty graph");
  if (!ls.covers(g)) {
    std::ostringstream msg;
    msg << "labels do not cover the graph; missing positions:";
    const std::size_t last = std::min(g.triple_count(), ls.size() + 10);
    for (std::size_t p = ls.size(); p < last; ++p) msg << ' ' << p;
    if (last < g.triple_count()) msg << " ... (" << g.triple_count() - ls.size() << " total)";
    throw ValidationError(msg.str());
  }
  return prefix_accuracy(ls, g.triple_count());
}

double prefix_accuracy(const LabelSource& ls, std::size_t triple_count) {
  if (triple_count == 0 || triple_count > ls.size()) throw ValidationError("label prefix out of range");
  std::size_t ones = 0;
  for (std::size_t p = 0; p < triple_count; ++p) ones += ls.labels[p];
  return static_cast<double>(ones) / static_cast<double>(triple_count);
}

std::vector<double> cluster_accuracies(const KnowledgeGraph& g, const LabelSource& ls) {
  if (!ls.covers(g)) throw ValidationError("labels do not cover the graph");
  std::vector<double> out(g.cluster_count());
  for (ClusterId c = 0; c < g.cluster_count(); ++c) {
    std::size_t ones = 0;
    for (TriplePos pos : g.cluster(c).triples) ones += ls.labels[pos];
    out[c] = static_cast<double>(ones) / static_cast<double>(g.cluster_size(c));
  }
  return out;
}

LabelSource read_fixture_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  LabelSource ls;
  ls.provenance = LabelProvenance::fixture;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    const auto fields = detail::split(detail::chomp(line), '\t');
    std::optional<unsigned char> label;
    if (fields.size() >= 4) label = detail::parse_label(fields.back());
    if (!label) throw ParseError("missing label column", lineno);
    ls.labels.push_back(*label);
  }
  if (ls.labels.empty()) throw ParseError("empty graph", 0);
  return ls;
}

void write_labels(const LabelSource& ls, const KnowledgeGraph& g, std::ostream& out) {
  if (!ls.covers(g)) throw ValidationError("labels do not cover the graph");
  out << "# graph_checksum=" << g.checksum() << '\n';
  for (std::size_t p = 0; p < g.triple_count(); ++p) out << p << '\t' << int(ls.labels[p]) << '\n';
}

void write_labels(const LabelSource& ls, const KnowledgeGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_labels(ls, g, out);
}

LabelSource read_labels(std::istream& in, const KnowledgeGraph& g) {
  LabelSource ls;
  ls.provenance = LabelProvenance::fixture;
  ls.labels.assign(g.triple_count(), 2);
  std::string line;
  std::size_t lineno = 0;
  bool checked = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.rfind("# graph_checksum=", 0) == 0) {
      const auto value = std::stoul(std::string(t.substr(17)));
      if (value != g.checksum()) throw ChecksumError("label file was written for a different graph");
      checked = true;
      continue;
    }
    if (detail::skippable(line)) continue;
    const auto fields = detail::split(t, '\t');
    if (fields.size() != 2) throw ParseError("expected position<TAB>label", lineno);
    std::size_t pos = 0;
    try {
      pos = std::stoul(std::string(fields[0]));
    } catch (const std::exception&) {
      throw ParseError("bad triple position", lineno);
    }
    const auto label = detail::parse_label(fields[1]);
    if (!label) throw ParseError("bad label", lineno);
    if (pos >= g.triple_count()) throw ParseError("triple position out of range", lineno);
    ls.labels[pos] = *label;
  }
  if (!checked) throw ChecksumError("label file has no graph_checksum header");
  for (std::size_t p = 0; p < ls.labels.size(); ++p)
    if (ls.labels[p] == 2) throw ValidationError("labels missing for position " + std::to_string(p));
  return ls;
}

LabelSource read_labels(const std::filesystem::path& path, const KnowledgeGraph& g) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return read_labels(in, g);
}

}  // namespace kgacc
