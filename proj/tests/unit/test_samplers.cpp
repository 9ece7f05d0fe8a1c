#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "kgacc/errors.hpp"
#include "kgacc/samplers.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;

namespace {

KnowledgeGraph toy(std::vector<std::uint32_t> sizes) { return synth::build_graph(sizes); }

// |observed - expected| within 5 binomial standard errors
void check_freq(std::size_t hits, std::size_t trials, double p) {
  const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
  CHECK(std::abs(static_cast<double>(hits) / static_cast<double>(trials) - p) < 5 * se + 1e-12);
}

}  // namespace

TEST_SUITE("samplers") {
  TEST_CASE("design names and validation") {
    for (auto k : {DesignKind::srs, DesignKind::rcs, DesignKind::wcs, DesignKind::twcs, DesignKind::stratified_twcs})
      CHECK(parse_design_kind(to_string(k)) == k);
    CHECK_THROWS_AS(parse_design_kind("bogus"), ValidationError);
    SamplingDesign d{DesignKind::twcs, 0};
    CHECK_THROWS_AS(d.validate(), ValidationError);
    d.m = 3;
    CHECK(d.take(10) == 3);
    CHECK(d.take(2) == 2);
    CHECK(SamplingDesign{DesignKind::wcs, 3}.take(10) == 10);
  }

  TEST_CASE("SRS is uniform and without replacement") {
    const auto g = toy({1, 2, 3});
    std::vector<std::size_t> hits(6);
    const std::size_t trials = 30000;
    for (std::size_t t = 0; t < trials; ++t) {
      const auto b = srs_draw(g, 2, 1000 + t);
      std::set<TriplePos> seen;
      for (const auto& d : b.draws)
        for (auto p : d.triples) {
          CHECK(seen.insert(p).second);
          CHECK(g.cluster_of(p) == d.cluster);
          ++hits[p];
        }
      CHECK(seen.size() == 2);
    }
    for (auto h : hits) check_freq(h, trials, 2.0 / 6.0);
    CHECK_THROWS_AS(srs_draw(g, 7, 1), ValidationError);
  }

  TEST_CASE("cluster designs draw with the right probabilities") {
    const auto g = toy({1, 2, 3, 4});
    const std::size_t trials = 40000;
    std::vector<std::size_t> rcs(4), wcs(4);
    const auto rb = rcs_draw(g, trials, 3);
    const auto wb = wcs_draw(g, trials, 3);
    for (const auto& d : rb.draws) {
      ++rcs[d.cluster];
      CHECK(d.triples.size() == d.cluster_size);
    }
    for (const auto& d : wb.draws) ++wcs[d.cluster];
    for (ClusterId c = 0; c < 4; ++c) {
      check_freq(rcs[c], trials, 0.25);
      check_freq(wcs[c], trials, (c + 1) / 10.0);
    }
  }

  TEST_CASE("TWCS second stage") {
    const auto g = toy({1, 5, 10});
    const auto b = twcs_draw(g, 5000, 3, 11);
    std::vector<std::size_t> pos_hits(g.triple_count());
    std::size_t big = 0;
    for (const auto& d : b.draws) {
      CHECK(d.triples.size() == std::min<std::uint32_t>(3, d.cluster_size));
      CHECK(std::is_sorted(d.triples.begin(), d.triples.end()));
      CHECK(std::adjacent_find(d.triples.begin(), d.triples.end()) == d.triples.end());
      if (d.cluster == 2) {
        ++big;
        for (auto p : d.triples) ++pos_hits[p];
      }
    }
    for (auto p : g.cluster(2).triples) check_freq(pos_hits[p], big, 0.3);

    // m = 1: one triple per draw
    for (const auto& d : twcs_draw(g, 200, 1, 5).draws) CHECK(d.triples.size() == 1);
  }

  TEST_CASE("draws are deterministic and batches independent") {
    const auto g = toy({2, 3, 4, 5, 6});
    const auto a = twcs_draw(g, 50, 2, 77, 0);
    const auto b = twcs_draw(g, 50, 2, 77, 0);
    const auto c = twcs_draw(g, 50, 2, 77, 1);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < 50; ++i) {
      same = same && a.draws[i].triples == b.draws[i].triples;
      differ = differ || a.draws[i].triples != c.draws[i].triples;
    }
    CHECK(same);
    CHECK(differ);
  }

  TEST_CASE("frames") {
    const auto g = toy({1, 2, 3, 4, 5});
    const auto whole = ClusterFrame::whole(g);
    CHECK(whole.size() == 5);
    CHECK(whole.weight() == 15);
    const auto r = ClusterFrame::range(g, 2, 5);
    CHECK(r.size() == 3);
    CHECK(r.weight() == 12);
    CHECK(r.member(0) == 2);
    const auto s = whole.slice(0, 2);
    CHECK(s.weight() == 3);
    const auto sub = ClusterFrame::subset(g, {0, 4});
    CHECK(sub.weight() == 6);
    std::vector<std::size_t> hits(5);
    Rng rng(9);
    for (int i = 0; i < 30000; ++i) ++hits[sub.pick_pps(rng)];
    check_freq(hits[4], 30000, 5.0 / 6.0);
    CHECK(hits[1] + hits[2] + hits[3] == 0);
    for (const auto& d : wcs_draw(g, r, 100, 4).draws) CHECK(d.cluster >= 2);
  }

  TEST_CASE("SRS stream never repeats") {
    const auto g = toy({3, 4, 5});
    SrsStream st(g, 5);
    std::set<TriplePos> all;
    for (std::uint32_t b = 0; b < 4; ++b)
      for (const auto& d : st.next(3, b).draws)
        for (auto p : d.triples) CHECK(all.insert(p).second);
    CHECK(all.size() == 12);
    CHECK(st.drawn() == 12);
  }

  TEST_CASE("task export") {
    const auto g = toy({2});
    std::ostringstream out;
    write_tasks(g, twcs_draw(g, 1, 2, 1), out);
    const auto text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') >= 2);
  }

  TEST_CASE("reservoir keeps a weight-3 cluster with probability 3/4") {
    const auto g = toy({1, 3});
    const std::size_t trials = 100000;
    std::size_t kept = 0;
    for (std::size_t t = 0; t < trials; ++t)
      if (reservoir_seed(g, 1, t).contains(1)) ++kept;
    check_freq(kept, trials, 0.75);
    CHECK_THROWS_AS(reservoir_seed(g, 0, 1), ValidationError);
  }

  TEST_CASE("reservoir update equals seeding on the grown graph") {
    const auto g = synth::build_graph(synth::draw_sizes(400, {}, 3));
    const auto base = reservoir_seed(g, 20, 99, 300);
    CHECK(base.clusters_seen() == 300);
    const auto up = reservoir_update(base, g);
    const auto full = reservoir_seed(g, 20, 99);
    CHECK(up.state.members() == full.members());
    for (auto c : up.admitted) CHECK(c >= 300);
    CHECK(up.admitted.size() == up.evicted.size());
    for (auto c : up.evicted) CHECK_FALSE(up.state.contains(c));
  }

  TEST_CASE("reservoir growth equals seeding with the larger capacity") {
    const auto g = synth::build_graph(synth::draw_sizes(500, {}, 4));
    auto st = reservoir_seed(g, 10, 5);
    const auto added = reservoir_grow(st, g, 15);
    CHECK(added.size() == 15);
    const auto direct = reservoir_seed(g, 25, 5);
    auto a = st.members(), b = direct.members();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    CHECK(st.capacity() == 25);
    // growth after updates
    auto part = reservoir_seed(g, 10, 5, 250);
    auto grown = reservoir_update(part, g).state;
    reservoir_grow(grown, g, 15);
    auto c = grown.members();
    std::sort(c.begin(), c.end());
    CHECK(c == b);
  }

  TEST_CASE("reservoir keys") {
    CHECK(reservoir_log_key(1, 0, 4) < 0.0);
    CHECK(reservoir_log_key(1, 0, 4) == reservoir_log_key(1, 0, 4));
    const auto g = toy({1, 2, 3, 4});
    const auto st = reservoir_seed(g, 2, 8);
    const auto e = st.entries();
    REQUIRE(e.size() == 2);
    CHECK(e[0].log_key >= e[1].log_key);
    CHECK(st.min_log_key() == e[1].log_key);
    std::uint64_t w = 0;
    for (auto c : st.members()) w += g.cluster_size(c);
    CHECK(st.member_weight() == w);
  }
}
