#include "kgacc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "kgacc/errors.hpp"

namespace kgacc {

namespace {

constexpr std::uint64_t kDrawTag = 0xd4a3;
constexpr std::uint64_t kSrsTag = 0x5e5;
constexpr std::uint64_t kKeyTag = 0xa4e5;
constexpr std::size_t kWaitlist = 64;
constexpr double kNoFloor = -std::numeric_limits<double>::infinity();

std::shared_ptr<const std::vector<std::uint64_t>> cumulative(const KnowledgeGraph& g) {
  auto cum = std::make_shared<std::vector<std::uint64_t>>(g.cluster_count() + 1, 0);
  for (ClusterId c = 0; c < g.cluster_count(); ++c) (*cum)[c + 1] = (*cum)[c] + g.cluster_size(c);
  return cum;
}

ClusterDraw whole_cluster(const KnowledgeGraph& g, ClusterId c) {
  ClusterDraw d;
  d.cluster = c;
  d.cluster_size = g.cluster_size(c);
  d.triples = g.cluster(c).triples;
  std::sort(d.triples.begin(), d.triples.end());
  return d;
}

// Heap order: the top is the entry evicted next (smallest key, then oldest).
bool evicted_later(const ReservoirEntry& a, const ReservoirEntry& b) {
  if (a.log_key != b.log_key) return a.log_key > b.log_key;
  return a.seq > b.seq;
}

}  // namespace

std::string_view to_string(DesignKind kind) noexcept {
  switch (kind) {
    case DesignKind::srs: return "srs";
    case DesignKind::rcs: return "rcs";
    case DesignKind::wcs: return "wcs";
    case DesignKind::twcs: return "twcs";
    case DesignKind::stratified_twcs: return "stratified_twcs";
  }
  return "?";
}

DesignKind parse_design_kind(std::string_view name) {
  if (name == "srs") return DesignKind::srs;
  if (name == "rcs") return DesignKind::rcs;
  if (name == "wcs") return DesignKind::wcs;
  if (name == "twcs") return DesignKind::twcs;
  if (name == "stratified_twcs" || name == "stwcs" || name == "stratified") return DesignKind::stratified_twcs;
  throw ValidationError("unknown design '" + std::string(name) + "' (srs, rcs, wcs, twcs, stratified_twcs)");
}

void SamplingDesign::validate() const {
  if ((kind == DesignKind::twcs || kind == DesignKind::stratified_twcs) && m < 1)
    throw ValidationError("m must be >= 1 for two-stage designs");
}

std::uint32_t SamplingDesign::take(std::uint32_t size) const noexcept {
  if (kind == DesignKind::twcs || kind == DesignKind::stratified_twcs) return std::min(size, m);
  return size;
}

double ClusterDraw::mean_label() const {
  if (!annotated()) throw ValidationError("draw is not annotated");
  return static_cast<double>(correct()) / static_cast<double>(labels.size());
}

std::size_t ClusterDraw::correct() const {
  std::size_t s = 0;
  for (auto l : labels) s += l;
  return s;
}

std::size_t DrawBatch::triple_count() const noexcept {
  std::size_t s = 0;
  for (const auto& d : draws) s += d.triples.size();
  return s;
}

// ---------------------------------------------------------------------------

ClusterFrame ClusterFrame::whole(const KnowledgeGraph& g) {
  return range(g, 0, static_cast<ClusterId>(g.cluster_count()));
}

ClusterFrame ClusterFrame::range(const KnowledgeGraph& g, ClusterId first, ClusterId last) {
  if (first > last || last > g.cluster_count()) throw ValidationError("cluster range out of bounds");
  ClusterFrame f;
  f.cum_ = cumulative(g);
  f.first_ = first;
  f.last_ = last;
  return f;
}

ClusterFrame ClusterFrame::slice(ClusterId first, ClusterId last) const {
  if (!members_.empty() || !cum_) throw ValidationError("slice needs a range frame");
  if (first > last || last + 1 > cum_->size()) throw ValidationError("cluster range out of bounds");
  ClusterFrame f = *this;
  f.first_ = first;
  f.last_ = last;
  return f;
}

ClusterFrame ClusterFrame::subset(const KnowledgeGraph& g, std::vector<ClusterId> members) {
  ClusterFrame f;
  auto cum = std::make_shared<std::vector<std::uint64_t>>(members.size() + 1, 0);
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (members[i] >= g.cluster_count()) throw ValidationError("cluster id out of range");
    (*cum)[i + 1] = (*cum)[i] + g.cluster_size(members[i]);
  }
  f.cum_ = std::move(cum);
  f.members_ = std::move(members);
  f.first_ = 0;
  f.last_ = static_cast<ClusterId>(f.members_.size());
  return f;
}

std::size_t ClusterFrame::size() const noexcept { return last_ - first_; }

std::uint64_t ClusterFrame::weight() const noexcept { return cum_ ? (*cum_)[last_] - (*cum_)[first_] : 0; }

ClusterId ClusterFrame::member(std::size_t i) const {
  if (i >= size()) throw ValidationError("frame index out of range");
  return members_.empty() ? static_cast<ClusterId>(first_ + i) : members_[first_ + i];
}

ClusterId ClusterFrame::pick_pps(Rng& rng) const {
  if (weight() == 0) throw ValidationError("cannot draw from an empty frame");
  const std::uint64_t target = (*cum_)[first_] + rng.below(weight());
  // First index i with cum[i+1] > target.
  const auto it = std::upper_bound(cum_->begin() + first_ + 1, cum_->begin() + last_ + 1, target);
  const auto i = static_cast<std::size_t>(it - cum_->begin()) - 1;
  return members_.empty() ? static_cast<ClusterId>(i) : members_[i];
}

ClusterId ClusterFrame::pick_uniform(Rng& rng) const {
  if (empty()) throw ValidationError("cannot draw from an empty frame");
  return member(rng.below(size()));
}

// ---------------------------------------------------------------------------

std::vector<TriplePos> subsample(const KnowledgeGraph& g, ClusterId cluster, std::uint32_t k, Rng& rng) {
  const auto& all = g.cluster(cluster).triples;
  const auto size = static_cast<std::uint32_t>(all.size());
  if (k >= size) {
    std::vector<TriplePos> out = all;
    std::sort(out.begin(), out.end());
    return out;
  }
  // Floyd: for j in [size-k, size) pick t in [0, j]; take t unless chosen,
  // else take j.
  std::vector<std::uint32_t> idx;
  idx.reserve(k);
  for (std::uint32_t j = size - k; j < size; ++j) {
    const auto t = static_cast<std::uint32_t>(rng.below(j + 1));
    if (std::find(idx.begin(), idx.end(), t) == idx.end()) idx.push_back(t);
    else idx.push_back(j);
  }
  std::vector<TriplePos> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(all[i]);
  std::sort(out.begin(), out.end());
  return out;
}

DrawBatch srs_draw(const KnowledgeGraph& g, std::size_t n_s, std::uint64_t seed, std::uint32_t batch_index) {
  const std::size_t M = g.triple_count();
  if (n_s > M) throw ValidationError("n_s exceeds the number of triples");
  Rng rng = Rng::stream(seed, kSrsTag, batch_index);
  std::vector<TriplePos> picked;
  if (n_s * 4 > M) {
    // Dense case: partial Fisher-Yates.
    std::vector<TriplePos> all(M);
    for (std::size_t i = 0; i < M; ++i) all[i] = static_cast<TriplePos>(i);
    for (std::size_t i = 0; i < n_s; ++i) std::swap(all[i], all[i + rng.below(M - i)]);
    picked.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_s));
  } else {
    std::unordered_set<TriplePos> chosen;
    for (std::size_t j = M - n_s; j < M; ++j) {
      const auto t = static_cast<TriplePos>(rng.below(j + 1));
      const auto take = chosen.insert(t).second ? t : static_cast<TriplePos>(j);
      if (take != t) chosen.insert(take);
      picked.push_back(take);
    }
  }
  std::sort(picked.begin(), picked.end());
  DrawBatch b;
  b.design = {DesignKind::srs, 1};
  b.seed = seed;
  b.batch_index = batch_index;
  std::map<ClusterId, std::size_t> slot;
  for (TriplePos p : picked) {
    const ClusterId c = g.cluster_of(p);
    auto [it, fresh] = slot.emplace(c, b.draws.size());
    if (fresh) b.draws.push_back({c, g.cluster_size(c), {}, {}});
    b.draws[it->second].triples.push_back(p);
  }
  return b;
}

DrawBatch SrsStream::next(std::size_t count, std::uint32_t batch_index) {
  if (taken_.size() + count > g_->triple_count()) throw ValidationError("SRS stream exhausted the graph");
  DrawBatch b;
  b.design = {DesignKind::srs, 1};
  b.seed = seed_;
  b.batch_index = batch_index;
  for (std::size_t k = 0; k < count; ++k) {
    Rng rng = Rng::stream(seed_, kSrsTag, batch_index, k);
    TriplePos p;
    do {
      p = static_cast<TriplePos>(rng.below(g_->triple_count()));
    } while (!taken_.insert(p).second);
    const ClusterId c = g_->cluster_of(p);
    b.draws.push_back({c, g_->cluster_size(c), {p}, {}});
  }
  return b;
}

DrawBatch rcs_draw(const KnowledgeGraph& g, std::size_t n, std::uint64_t seed, std::uint32_t batch_index) {
  return rcs_draw(g, ClusterFrame::whole(g), n, seed, batch_index);
}

DrawBatch rcs_draw(const KnowledgeGraph& g, const ClusterFrame& frame, std::size_t n, std::uint64_t seed,
                   std::uint32_t batch_index) {
  if (n == 0) throw ValidationError("rcs_draw needs n >= 1");
  DrawBatch b;
  b.design = {DesignKind::rcs, 1};
  b.seed = seed;
  b.batch_index = batch_index;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = Rng::stream(seed, kDrawTag, batch_index, k);
    b.draws.push_back(whole_cluster(g, frame.pick_uniform(rng)));
  }
  return b;
}

DrawBatch wcs_draw(const KnowledgeGraph& g, std::size_t n, std::uint64_t seed, std::uint32_t batch_index) {
  return wcs_draw(g, ClusterFrame::whole(g), n, seed, batch_index);
}

DrawBatch wcs_draw(const KnowledgeGraph& g, const ClusterFrame& frame, std::size_t n, std::uint64_t seed,
                   std::uint32_t batch_index) {
  if (n == 0) throw ValidationError("wcs_draw needs n >= 1");
  DrawBatch b;
  b.design = {DesignKind::wcs, 1};
  b.seed = seed;
  b.batch_index = batch_index;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = Rng::stream(seed, kDrawTag, batch_index, k);
    b.draws.push_back(whole_cluster(g, frame.pick_pps(rng)));
  }
  return b;
}

DrawBatch twcs_draw(const KnowledgeGraph& g, std::size_t n, std::uint32_t m, std::uint64_t seed,
                    std::uint32_t batch_index) {
  return twcs_draw(g, ClusterFrame::whole(g), n, m, seed, batch_index);
}

DrawBatch twcs_draw(const KnowledgeGraph& g, const ClusterFrame& frame, std::size_t n, std::uint32_t m,
                    std::uint64_t seed, std::uint32_t batch_index) {
  if (n == 0) throw ValidationError("twcs_draw needs n >= 1");
  if (m == 0) throw ValidationError("m must be >= 1");
  DrawBatch b;
  b.design = {DesignKind::twcs, m};
  b.seed = seed;
  b.batch_index = batch_index;
  b.draws.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = Rng::stream(seed, kDrawTag, batch_index, k);
    const ClusterId c = frame.pick_pps(rng);
    b.draws.push_back({c, g.cluster_size(c), subsample(g, c, m, rng), {}});
  }
  return b;
}

void write_tasks(const KnowledgeGraph& g, const DrawBatch& batch, std::ostream& out) {
  out << "entity_id\tcluster\tposition\tsubject\tpredicate\tobject\n";
  for (const auto& d : batch.draws) {
    const auto& entity = g.cluster(d.cluster).entity_id;
    for (TriplePos p : d.triples) {
      const auto& t = g.triple(p);
      out << entity << '\t' << d.cluster << '\t' << p << '\t' << t.subject << '\t' << t.predicate << '\t'
          << t.object << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

double reservoir_log_key(std::uint64_t seed, ClusterId cluster, std::uint32_t weight) noexcept {
  Rng rng = Rng::stream(seed, kKeyTag, cluster);
  return std::log(rng.uniform_open()) / static_cast<double>(weight);
}

double ReservoirState::min_log_key() const noexcept {
  return heap_.empty() ? -std::numeric_limits<double>::infinity() : heap_.front().log_key;
}

std::vector<ReservoirEntry> ReservoirState::entries() const {
  auto out = heap_;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return evicted_later(a, b); });
  return out;
}

std::vector<ClusterId> ReservoirState::members() const {
  std::vector<ClusterId> out;
  for (const auto& e : entries()) out.push_back(e.cluster);
  return out;
}

void ReservoirState::push(const KnowledgeGraph& g, ClusterId c, double log_key) {
  heap_.push_back({c, log_key, seq_++});
  std::push_heap(heap_.begin(), heap_.end(), evicted_later);
  members_.insert(c);
  member_weight_ += g.cluster_size(c);
  ++admissions_;
}

ReservoirEntry ReservoirState::pop_min(const KnowledgeGraph& g) {
  std::pop_heap(heap_.begin(), heap_.end(), evicted_later);
  const auto e = heap_.back();
  heap_.pop_back();
  members_.erase(e.cluster);
  member_weight_ -= g.cluster_size(e.cluster);
  return e;
}

void ReservoirState::offer_waitlist(ClusterId c, double log_key) {
  if (log_key <= floor_) return;
  waitlist_.emplace(log_key, c);
  if (waitlist_.size() > kWaitlist) {
    auto last = std::prev(waitlist_.end());
    floor_ = std::max(floor_, last->first);
    waitlist_.erase(last);
  }
}

void ReservoirState::rebuild_waitlist(const KnowledgeGraph& g) {
  std::vector<std::pair<double, ClusterId>> keys;
  for (ClusterId c = 0; c < seen_; ++c)
    if (!members_.count(c)) keys.emplace_back(reservoir_log_key(seed_, c, g.cluster_size(c)), c);
  waitlist_.clear();
  floor_ = kNoFloor;
  const auto by_key = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  if (keys.size() > kWaitlist) {
    std::nth_element(keys.begin(), keys.begin() + kWaitlist, keys.end(), by_key);
    floor_ = keys[kWaitlist].first;
    keys.resize(kWaitlist);
  }
  for (const auto& [k, c] : keys) waitlist_.emplace(k, c);
}

ReservoirState reservoir_seed(const KnowledgeGraph& g, std::size_t capacity, std::uint64_t seed,
                              std::size_t cluster_limit) {
  if (capacity < 1) throw ValidationError("reservoir capacity must be >= 1");
  if (g.cluster_count() == 0) throw ValidationError("empty graph");
  const std::size_t n = std::min(cluster_limit, g.cluster_count());
  ReservoirState s;
  s.capacity_ = capacity;
  s.seed_ = seed;
  s.seen_ = n;
  std::vector<std::pair<double, ClusterId>> keys(n);
  for (ClusterId c = 0; c < n; ++c) keys[c] = {reservoir_log_key(seed, c, g.cluster_size(c)), c};
  const auto by_key = [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); };
  const std::size_t keep = std::min(n, capacity + kWaitlist);
  s.floor_ = kNoFloor;
  if (keep < n) {
    std::nth_element(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(keep), keys.end(), by_key);
    s.floor_ = keys[keep].first;
    keys.resize(keep);
  }
  std::sort(keys.begin(), keys.end(), by_key);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i < capacity) s.push(g, keys[i].second, keys[i].first);
    else s.waitlist_.emplace(keys[i].first, keys[i].second);
  }
  s.admissions_ = 0;
  return s;
}

ReservoirUpdate reservoir_update(const ReservoirState& state, const KnowledgeGraph& g, std::size_t cluster_limit) {
  if (state.capacity_ == 0) throw ValidationError("reservoir is not seeded");
  const std::size_t limit = std::min(cluster_limit, g.cluster_count());
  if (limit < state.seen_) throw ValidationError("graph is older than the reservoir");
  ReservoirUpdate out{state, {}, {}, 0};
  ReservoirState& s = out.state;
  for (ClusterId c = static_cast<ClusterId>(s.seen_); c < limit; ++c) {
    const double key = reservoir_log_key(s.seed_, c, g.cluster_size(c));
    if (s.heap_.size() < s.capacity_) {
      s.push(g, c, key);
      ++out.admissions;
    } else if (key > s.min_log_key()) {
      const auto gone = s.pop_min(g);
      s.offer_waitlist(gone.cluster, gone.log_key);
      s.push(g, c, key);
      ++out.admissions;
    } else {
      s.offer_waitlist(c, key);
    }
  }
  s.seen_ = limit;
  for (ClusterId c : s.members_)
    if (!state.contains(c)) out.admitted.push_back(c);
  for (ClusterId c : state.members_)
    if (!s.contains(c)) out.evicted.push_back(c);
  std::sort(out.admitted.begin(), out.admitted.end());
  std::sort(out.evicted.begin(), out.evicted.end());
  return out;
}

std::vector<ClusterId> reservoir_grow(ReservoirState& state, const KnowledgeGraph& g, std::size_t extra) {
  std::vector<ClusterId> added;
  state.capacity_ += extra;
  while (state.heap_.size() < state.capacity_) {
    if (state.waitlist_.empty()) {
      if (state.floor_ == kNoFloor) break;  // every seen cluster is a member
      state.rebuild_waitlist(g);
      if (state.waitlist_.empty()) break;
    }
    const auto top = state.waitlist_.begin();
    state.push(g, top->second, top->first);
    added.push_back(top->second);
    state.waitlist_.erase(top);
  }
  return added;
}

}  // namespace kgacc
