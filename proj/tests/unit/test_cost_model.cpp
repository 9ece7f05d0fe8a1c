#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kgacc/cost_model.hpp"
#include "kgacc/errors.hpp"
#include "kgacc/labelgen.hpp"
#include "kgacc/rng.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;

TEST_SUITE("cost_model") {
  TEST_CASE("cost arithmetic") {
    const CostParams cp{45, 25};
    CHECK(cost_seconds({174, 174}, cp) == 12180.0);
    CHECK(cost_hours({174, 174}, cp) == doctest::Approx(3.3833).epsilon(1e-4));
    CHECK(cost_seconds({24, 178}, cp) == 5530.0);
    CHECK(cost_hours({24, 178}, cp) == doctest::Approx(1.54).epsilon(0.005));
    CHECK(cost_seconds({0, 0}, cp) == 0.0);
    // linear in the footprint
    CHECK(cost_seconds(SampleFootprint{3, 7} + SampleFootprint{5, 11}, cp) ==
          cost_seconds({3, 7}, cp) + cost_seconds({5, 11}, cp));
  }

  TEST_CASE("normal quantile") {
    CHECK(z_critical(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(z_critical(0.01) == doctest::Approx(2.5758293035489).epsilon(1e-12));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-10));
    CHECK_THROWS_AS(z_critical(0.0), ValidationError);
    CHECK_THROWS_AS(z_critical(1.0), ValidationError);
  }

  TEST_CASE("fit recovers exact parameters") {
    std::vector<CostObservation> obs;
    for (double e : {3.0, 10.0, 24.0, 80.0})
      for (double t : {20.0, 50.0, 178.0}) obs.push_back({e, t, 45 * e + 25 * t});
    const auto cp = fit_params(obs);
    CHECK(cp.c1 == doctest::Approx(45).epsilon(1e-9));
    CHECK(cp.c2 == doctest::Approx(25).epsilon(1e-9));
  }

  TEST_CASE("fit on the two manual-evaluation rows") {
    // 174 entities / 174 triples in 3.53 h; 24 entities / 178 triples in 1.4 h
    const std::vector<CostObservation> obs{{174, 174, 3.53 * 3600}, {24, 178, 1.4 * 3600}};
    const auto cp = fit_params(obs);
    CHECK(cp.c1 == doctest::Approx(51.7).epsilon(0.005));
    CHECK(cp.c2 == doctest::Approx(21.3).epsilon(0.005));
  }

  TEST_CASE("fit errors") {
    const std::vector<CostObservation> one{{10, 10, 700}};
    CHECK_THROWS_AS(fit_params(one), ValidationError);
    const std::vector<CostObservation> collinear{{1, 2, 100}, {2, 4, 200}, {3, 6, 300}};
    CHECK_THROWS_AS(fit_params(collinear), ValidationError);
    const std::vector<CostObservation> negative{{1, 1, -10}, {2, 1, -20}};
    CHECK_THROWS_AS(fit_params(negative), ValidationError);
  }

  TEST_CASE("fit clips a negative coefficient") {
    // the unconstrained solution has c2 < 0
    const std::vector<CostObservation> obs{{10, 10, 500}, {20, 40, 900}, {30, 90, 1300}};
    const auto cp = fit_params(obs);
    CHECK(cp.c1 > 0);
    CHECK(cp.c2 == 0.0);
  }

  TEST_CASE("observations and params files") {
    std::istringstream in("entities,triples,seconds\n174,174,14040\n24,178,5400\n");
    const auto obs = read_observations(in);
    REQUIRE(obs.size() == 2);
    CHECK(obs[1].triples == 178);
    std::stringstream buf;
    write_params({51.7, 21.3}, buf);
    const auto cp = read_params(buf);
    CHECK(cp.c1 == 51.7);
    CHECK(cp.c2 == 21.3);
    std::istringstream bad("entities,triples,seconds\n1,x,3\n");
    CHECK_THROWS_AS(read_observations(bad), ParseError);
  }

  TEST_CASE("expected unique entities") {
    const std::vector<std::uint32_t> sizes{1, 2, 3};
    CHECK(expected_unique_entities(sizes, 0) == 0.0);
    CHECK(expected_unique_entities(sizes, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(expected_unique_entities(sizes, 2) == doctest::Approx(58.0 / 36.0).epsilon(1e-12));
    CHECK(expected_unique_entities(sizes, 2) == doctest::Approx(1.611).epsilon(1e-3));
  }

  TEST_CASE("SRS sample size") {
    const Requirement req{0.05, 0.05};
    CHECK(srs_required_n(0.5, req) == 385);
    CHECK(srs_required_n(0.5, {0.5, 0.05}) == 4);
    CHECK(srs_required_n(1.0, req, 40) == static_cast<std::size_t>(std::ceil(0.25 / 40 * 1.959963984540054 *
                                                                               1.959963984540054 / 0.0025)));
    CHECK(srs_required_n(1.0, req, 40) > 0);
  }

  TEST_CASE("requirement validation") {
    CHECK_THROWS_AS(Requirement({0.0, 0.05}).validate(), ValidationError);
    CHECK_THROWS_AS(Requirement({0.05, 1.0}).validate(), ValidationError);
    CHECK_THROWS_AS(CostParams({0.0, 25}).validate(), ValidationError);
  }

  TEST_CASE("TWCS variance identities") {
    AccuracyProfile p;
    p.sizes = {1, 2, 3};
    p.mu = {1.0, 0.5, 2.0 / 3.0};
    const double mu = p.overall();
    CHECK(mu == doctest::Approx(2.0 / 3.0));
    // m >= max size: between-cluster variance only
    const double between = (1 * std::pow(1 - mu, 2) + 2 * std::pow(0.5 - mu, 2) + 3 * std::pow(2.0 / 3 - mu, 2)) / 6;
    CHECK(twcs_variance(p, 3) == doctest::Approx(between).epsilon(1e-14));
    // m = 2: only the size-3 cluster keeps a within term
    const double within2 = (1.0 / 2) * ((3.0 - 2) / (3 - 1)) * 3 * (2.0 / 3) * (1.0 / 3) / 6;
    CHECK(twcs_variance(p, 2) == doctest::Approx(between + within2).epsilon(1e-14));
    CHECK_THROWS_AS(twcs_variance(p, 0), ValidationError);

    // m = 1 equals mu (1 - mu) on random profiles
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
      AccuracyProfile q;
      const auto n = 1 + rng.below(12);
      for (std::uint64_t i = 0; i < n; ++i) {
        const auto s = static_cast<std::uint32_t>(1 + rng.below(9));
        q.sizes.push_back(s);
        q.mu.push_back(static_cast<double>(rng.below(s + 1)) / s);
      }
      const double m0 = q.overall();
      CHECK(twcs_variance(q, 1) == doctest::Approx(m0 * (1 - m0)).epsilon(1e-12));
      for (std::uint32_t m = 1; m < 12; ++m) CHECK(twcs_variance(q, m + 1) <= twcs_variance(q, m) + 1e-15);
    }
    // equal accuracies: no between-cluster term
    const auto flat = AccuracyProfile::constant(std::vector<std::uint32_t>{4, 4, 4}, 0.5);
    CHECK(twcs_variance(flat, 4) == 0.0);
  }

  TEST_CASE("optimal m") {
    const auto g = synth::build_graph(synth::draw_sizes_for_triples(100000, {}, 5));
    const auto ls = gen_bmm(g, {}, 8);
    const auto prof = AccuracyProfile::from_labels(g, ls);
    const Requirement req;
    const auto opt = optimal_m(prof, req, {45, 25});
    CHECK(opt.best.m >= 3);
    CHECK(opt.best.m <= 5);
    CHECK(opt.sweep.size() == 20);
    CHECK(opt.best.cost <= opt.sweep.front().cost);

    // c2 = 0: cost falls with m, so the largest useful m wins
    const auto free_triples = optimal_m(prof, req, {45, 1e-300}, 1, 20);
    CHECK(free_triples.best.m >= opt.best.m);

    // m_max = 1 is the SRS-equivalent design
    const auto one = optimal_m(prof, req, {45, 25}, 1, 1);
    CHECK(one.best.m == 1);
    const double mu = prof.overall();
    CHECK(one.best.n == static_cast<std::size_t>(std::ceil(mu * (1 - mu) * req.z() * req.z() / 0.0025 - 1e-9)));
    CHECK_THROWS_AS(optimal_m(prof, req, {45, 25}, 5, 4), ValidationError);
  }

  TEST_CASE("ties go to the smaller m") {
    // every cluster has size 1: V(m) is constant, cost grows with m
    const auto prof = AccuracyProfile::constant(std::vector<std::uint32_t>(50, 1), 0.5);
    const auto opt = optimal_m(prof, {}, {45, 0.0}, 1, 10);
    CHECK(opt.best.m == 1);
  }
}
