#include "kgacc/kg_store.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "kgacc/errors.hpp"
#include "tsv.hpp"

namespace kgacc {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'A', 'C', 'C', 'S', 'N', 'P'};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(b[i]);
    return v;
  }
  std::string str() { return std::string(take(u32())); }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view take(std::size_t n) {
    if (data_.size() - pos_ < n) throw ChecksumError("snapshot payload truncated");
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string encode_payload(const KnowledgeGraph& g) {
  ByteWriter w;
  w.u64(g.triple_count());
  for (const auto& t : g.triples()) {
    w.str(t.subject);
    w.str(t.predicate);
    w.str(t.object);
    w.u8(static_cast<std::uint8_t>(t.object_kind));
  }
  w.u64(g.cluster_count());
  for (const auto& c : g.clusters()) {
    w.str(c.entity_id);
    w.u32(c.batch_id);
    w.u64(c.triples.size());
    for (auto p : c.triples) w.u32(p);
  }
  return w.bytes();
}

std::uint32_t crc(std::string_view bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), n);
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

ObjectKind parse_kind(std::string_view s, std::size_t line) {
  s = detail::trim(s);
  if (s == "entity") return ObjectKind::entity;
  if (s == "data") return ObjectKind::data;
  throw ParseError("bad object_kind '" + std::string(s) + "'", line);
}

struct RawRecord {
  Triple triple;
  bool kind_given = false;
};

void parse_tsv_line(std::string_view line, std::size_t lineno, std::vector<RawRecord>& out) {
  const auto fields = detail::split(detail::chomp(line), '\t');
  if (fields.size() < 3 || fields.size() > 5)
    throw ParseError("expected 3-5 tab-separated fields, got " + std::to_string(fields.size()), lineno);
  RawRecord rec;
  rec.triple.subject = std::string(detail::trim(fields[0]));
  rec.triple.predicate = std::string(detail::trim(fields[1]));
  rec.triple.object = std::string(detail::trim(fields[2]));
  if (rec.triple.subject.empty()) throw ParseError("empty subject", lineno);
  if (rec.triple.predicate.empty()) throw ParseError("empty predicate", lineno);
  if (fields.size() == 4) {
    // Either object_kind or a label; labels are consumed elsewhere.
    const auto f = detail::trim(fields[3]);
    if (f == "entity" || f == "data") {
      rec.triple.object_kind = parse_kind(f, lineno);
      rec.kind_given = true;
    } else if (!detail::parse_label(f)) {
      throw ParseError("fourth column is neither object_kind nor label", lineno);
    }
  } else if (fields.size() == 5) {
    rec.triple.object_kind = parse_kind(fields[3], lineno);
    rec.kind_given = true;
    if (!detail::parse_label(fields[4])) throw ParseError("bad label column", lineno);
  }
  out.push_back(std::move(rec));
}

// <s> <p> <o> .   or   <s> <p> "literal" .
void parse_ntriples_line(std::string_view line, std::size_t lineno, std::vector<RawRecord>& out) {
  auto rest = detail::trim(line);
  auto iri = [&](const char* what) {
    if (rest.empty() || rest.front() != '<') throw ParseError(std::string("expected <") + what + ">", lineno);
    const auto close = rest.find('>');
    if (close == std::string_view::npos) throw ParseError("unterminated IRI", lineno);
    std::string v(rest.substr(1, close - 1));
    rest = detail::trim(rest.substr(close + 1));
    return v;
  };
  RawRecord rec;
  rec.kind_given = true;
  rec.triple.subject = iri("subject");
  rec.triple.predicate = iri("predicate");
  if (!rest.empty() && rest.front() == '"') {
    std::size_t i = 1;
    std::string lit;
    while (i < rest.size() && rest[i] != '"') {
      if (rest[i] == '\\' && i + 1 < rest.size()) ++i;
      lit.push_back(rest[i++]);
    }
    if (i >= rest.size()) throw ParseError("unterminated literal", lineno);
    rest = rest.substr(i + 1);
    // Drop datatype or language tag.
    while (!rest.empty() && rest.front() != ' ' && rest.front() != '\t' && rest.front() != '.') rest.remove_prefix(1);
    rest = detail::trim(rest);
    rec.triple.object = std::move(lit);
    rec.triple.object_kind = ObjectKind::data;
  } else {
    rec.triple.object = iri("object");
    rec.triple.object_kind = ObjectKind::entity;
  }
  if (rest != ".") throw ParseError("expected terminating '.'", lineno);
  if (rec.triple.subject.empty()) throw ParseError("empty subject", lineno);
  out.push_back(std::move(rec));
}

std::vector<Triple> parse_records(std::istream& in, GraphFormat format) {
  std::vector<RawRecord> recs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    if (format == GraphFormat::tsv)
      parse_tsv_line(line, lineno, recs);
    else
      parse_ntriples_line(line, lineno, recs);
  }
  if (recs.empty()) throw ParseError("empty graph", 0);

  {
    std::unordered_set<std::string_view> subjects;
    for (const auto& r : recs) subjects.insert(r.triple.subject);
    for (auto& r : recs)
      if (!r.kind_given)
        r.triple.object_kind = subjects.count(r.triple.object) ? ObjectKind::entity : ObjectKind::data;
  }
  std::vector<Triple> triples;
  triples.reserve(recs.size());
  for (auto& r : recs) triples.push_back(std::move(r.triple));
  return triples;
}

}  // namespace

std::string_view to_string(ObjectKind kind) noexcept { return kind == ObjectKind::entity ? "entity" : "data"; }

std::size_t DeltaBatch::triple_count() const noexcept {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.triples.size();
  return n;
}

void DeltaBatch::validate() const {
  for (const auto& g : groups) {
    if (g.triples.empty()) throw ValidationError("delta group for '" + g.entity_id + "' is empty");
    for (const auto& t : g.triples)
      if (t.subject != g.entity_id)
        throw ValidationError("delta triple subject '" + t.subject + "' differs from group '" + g.entity_id + "'");
  }
}

DeltaBatch DeltaBatch::group(std::uint32_t batch_id, std::vector<Triple> triples) {
  DeltaBatch d;
  d.batch_id = batch_id;
  std::unordered_map<std::string, std::size_t> where;
  for (auto& t : triples) {
    auto [it, fresh] = where.try_emplace(t.subject, d.groups.size());
    if (fresh) d.groups.push_back(DeltaGroup{t.subject, {}});
    d.groups[it->second].triples.push_back(std::move(t));
  }
  return d;
}

ClusterId KnowledgeGraph::add_cluster(const std::string& entity_id, std::uint32_t batch_id) {
  const auto id = static_cast<ClusterId>(clusters_.size());
  auto [it, fresh] = entities_.try_emplace(entity_id);
  if (fresh) it->second.key = static_cast<std::uint32_t>(entities_.size() - 1);
  it->second.clusters.push_back(id);
  clusters_.push_back(EntityCluster{entity_id, batch_id, {}});
  cluster_entity_.push_back(it->second.key);
  return id;
}

void KnowledgeGraph::append_triple(ClusterId cluster, Triple t) {
  const auto pos = static_cast<TriplePos>(triples_.size());
  triples_.push_back(std::move(t));
  owner_.push_back(cluster);
  clusters_[cluster].triples.push_back(pos);
}

KnowledgeGraph KnowledgeGraph::from_triples(std::vector<Triple> triples) {
  KnowledgeGraph g;
  g.triples_.reserve(triples.size());
  g.owner_.reserve(triples.size());
  for (auto& t : triples) {
    if (t.subject.empty()) throw ValidationError("triple with empty subject");
    auto it = g.entities_.find(t.subject);
    const ClusterId c = it == g.entities_.end() ? g.add_cluster(t.subject, 0) : it->second.clusters.front();
    g.append_triple(c, std::move(t));
  }
  return g;
}

std::optional<ClusterId> KnowledgeGraph::find(std::string_view entity_id, std::uint32_t batch_id) const {
  auto it = entities_.find(std::string(entity_id));
  if (it == entities_.end()) return std::nullopt;
  for (auto c : it->second.clusters)
    if (clusters_[c].batch_id == batch_id) return c;
  return std::nullopt;
}

std::vector<std::uint32_t> KnowledgeGraph::cluster_sizes() const {
  std::vector<std::uint32_t> out;
  out.reserve(clusters_.size());
  for (const auto& c : clusters_) out.push_back(static_cast<std::uint32_t>(c.size()));
  return out;
}

std::uint32_t KnowledgeGraph::checksum() const { return crc(encode_payload(*this)); }

KnowledgeGraph parse_graph(std::istream& in, GraphFormat format) {
  return KnowledgeGraph::from_triples(parse_records(in, format));
}

KnowledgeGraph ingest(const std::filesystem::path& path, GraphFormat format) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open graph file " + path.string());
  return parse_graph(in, format);
}

KnowledgeGraph apply_delta(const KnowledgeGraph& g, const DeltaBatch& d, DeltaMode mode) {
  d.validate();
  KnowledgeGraph out = g;
  for (const auto& grp : d.groups) {
    ClusterId target;
    if (mode == DeltaMode::merge) {
      auto it = out.entities_.find(grp.entity_id);
      target = it == out.entities_.end() ? out.add_cluster(grp.entity_id, d.batch_id) : it->second.clusters.front();
    } else {
      if (out.find(grp.entity_id, d.batch_id))
        throw ValidationError("entity '" + grp.entity_id + "' appears twice in delta batch " +
                              std::to_string(d.batch_id));
      target = out.add_cluster(grp.entity_id, d.batch_id);
    }
    for (const auto& t : grp.triples) out.append_triple(target, t);
  }
  return out;
}

DeltaBatch read_delta(const std::filesystem::path& path, std::uint32_t batch_id) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open delta file " + path.string());
  return DeltaBatch::group(batch_id, parse_records(in, GraphFormat::tsv));
}

GraphStats stats(const KnowledgeGraph& g) {
  GraphStats s;
  s.clusters = g.cluster_count();
  s.triples = g.triple_count();
  s.mean_cluster_size = s.clusters ? static_cast<double>(s.triples) / static_cast<double>(s.clusters) : 0.0;
  for (const auto& c : g.clusters()) ++s.size_histogram[c.size()];
  return s;
}

void write_snapshot(const KnowledgeGraph& g, std::ostream& out) {
  if (g.empty()) throw ValidationError("empty graph");
  const std::string payload = encode_payload(g);
  ByteWriter head;
  head.u32(kSnapshotVersion);
  head.u64(payload.size());
  ByteWriter tail;
  tail.u32(crc(payload));
  out.write(kMagic, sizeof kMagic);
  out.write(head.bytes().data(), static_cast<std::streamsize>(head.bytes().size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.write(tail.bytes().data(), static_cast<std::streamsize>(tail.bytes().size()));
  if (!out) throw Error("snapshot write failed");
}

KnowledgeGraph read_snapshot(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof kMagic + 12 || !std::equal(kMagic, kMagic + sizeof kMagic, data.begin()))
    throw ParseError("not a graph snapshot", 0);
  ByteReader head(std::string_view(data).substr(sizeof kMagic, 12));
  const auto version = head.u32();
  if (version != kSnapshotVersion)
    throw VersionError("snapshot version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kSnapshotVersion) + ")");
  const auto len = head.u64();
  const std::size_t start = sizeof kMagic + 12;
  if (data.size() - start < len + 4) throw ChecksumError("snapshot truncated");
  const std::string_view payload = std::string_view(data).substr(start, len);
  ByteReader tail(std::string_view(data).substr(start + len, 4));
  if (tail.u32() != crc(payload)) throw ChecksumError("snapshot checksum mismatch");

  ByteReader r(payload);
  KnowledgeGraph g;
  const auto n_triples = r.u64();
  g.triples_.reserve(n_triples);
  for (std::uint64_t i = 0; i < n_triples; ++i) {
    Triple t;
    t.subject = r.str();
    t.predicate = r.str();
    t.object = r.str();
    const auto kind = r.u8();
    if (kind > 1) throw ChecksumError("bad object kind in snapshot");
    t.object_kind = static_cast<ObjectKind>(kind);
    g.triples_.push_back(std::move(t));
  }
  g.owner_.assign(n_triples, static_cast<ClusterId>(-1));
  const auto n_clusters = r.u64();
  for (std::uint64_t c = 0; c < n_clusters; ++c) {
    std::string entity = r.str();
    const auto batch = r.u32();
    const auto id = g.add_cluster(entity, batch);
    const auto n = r.u64();
    if (n == 0) throw ChecksumError("empty cluster in snapshot");
    auto& cl = g.clusters_[id];
    cl.triples.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
      const auto p = r.u32();
      if (p >= n_triples || g.owner_[p] != static_cast<ClusterId>(-1) || g.triples_[p].subject != entity)
        throw ChecksumError("inconsistent cluster membership in snapshot");
      g.owner_[p] = id;
      cl.triples.push_back(p);
    }
  }
  if (!r.done()) throw ChecksumError("trailing bytes in snapshot payload");
  if (std::find(g.owner_.begin(), g.owner_.end(), static_cast<ClusterId>(-1)) != g.owner_.end())
    throw ChecksumError("snapshot leaves triples without a cluster");
  if (g.empty()) throw ValidationError("empty graph");
  return g;
}

void snapshot(const KnowledgeGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write snapshot " + path.string());
  write_snapshot(g, out);
}

KnowledgeGraph restore(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open snapshot " + path.string());
  return read_snapshot(in);
}

}  // namespace kgacc
