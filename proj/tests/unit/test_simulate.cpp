#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kgacc/labelgen.hpp"
#include "kgacc/simulate.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;

TEST_SUITE("simulate") {
  TEST_CASE("summary") {
    const std::vector<double> x{1, 2, 3, 4};
    const auto s = sim::Summary::of(x);
    CHECK(s.count == 4);
    CHECK(s.mean == 2.5);
    CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.min == 1);
    CHECK(s.max == 4);
  }

  TEST_CASE("parallel trials do not depend on the thread count") {
    const auto one = sim::parallel_trials<std::uint64_t>(100, 1, [](std::size_t t) { return Rng::derive(5, {t}); });
    const auto four = sim::parallel_trials<std::uint64_t>(100, 4, [](std::size_t t) { return Rng::derive(5, {t}); });
    CHECK(one == four);

    const auto g = synth::build_graph(synth::draw_sizes_for_triples(5000, {}, 1));
    const auto ls = gen_bmm(g, {}, 2);
    SessionConfig cfg;
    cfg.design = {DesignKind::twcs, 3};
    const auto a = sim::static_trials(g, ls, cfg, 12, 9, 1);
    const auto b = sim::static_trials(g, ls, cfg, 12, 9, 3);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(a.trials[i].estimate.mu_hat == b.trials[i].estimate.mu_hat);
      CHECK(a.trials[i].cost.seconds == b.trials[i].cost.seconds);
    }
    CHECK(a.unsound() == 0);
    CHECK(a.true_mu == doctest::Approx(true_accuracy(g, ls)));
  }

  TEST_CASE("scenario shape") {
    sim::ScenarioSpec spec;
    spec.base_triples = 10000;
    spec.delta_triples = {1000, 2000};
    const auto sc = sim::build_scenario(spec);
    REQUIRE(sc->versions.count() == 3);
    CHECK(sc->versions.triples[0] >= 10000);
    CHECK(sc->versions.triples[1] - sc->versions.triples[0] >= 1000);
    CHECK(sc->versions.triples[2] - sc->versions.triples[1] >= 2000);
    CHECK(sc->labels.size() == sc->graph.triple_count());
    CHECK(sc->true_accuracy.size() == 3);
    CHECK(sc->true_accuracy[0] == doctest::Approx(0.9).epsilon(0.03));
    // same spec, same scenario
    const auto again = sim::build_scenario(spec);
    CHECK(again->graph == sc->graph);
    CHECK(again->labels.labels == sc->labels.labels);
    spec.existing_share = 1.5;
    CHECK_THROWS(sim::build_scenario(spec));
  }

  TEST_CASE("evolving trials and sweep") {
    sim::ScenarioSpec spec;
    spec.base_triples = 10000;
    spec.delta_triples = {2000};
    const auto sc = sim::build_scenario(spec);
    const auto t = sim::evolving_trials(*sc, EvolveMethod::ss, {}, 6, 3, 2);
    CHECK(t.runs.size() == 6);
    CHECK(t.steps() == 2);
    CHECK(t.unsound_steps() == 0);
    std::ostringstream out;
    sim::write_evolving_csv(t, out);
    CHECK(out.str().rfind("version,true_mu,mean_mu_hat,sd_mu_hat,mean_moe,mean_step_hours,mean_total_hours\n", 0) == 0);

    SessionConfig cfg;
    const auto rows = sim::m_sweep(sc->graph, sc->labels, cfg, 1, 3, 4, 1, 2);
    CHECK(rows.size() == 3);
    CHECK(rows[0].m == 1);
    std::ostringstream csv;
    sim::write_sweep_csv(rows, csv);
    CHECK(csv.str().rfind("m,predicted_n,predicted_hours,sim_mean_hours,sim_sd_hours,sim_mean_estimate\n", 0) == 0);
  }
}
