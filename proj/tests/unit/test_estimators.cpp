#include <doctest.h>

#include <cmath>
#include <limits>

#include "kgacc/errors.hpp"
#include "kgacc/estimators.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;

namespace {

std::vector<std::uint8_t> ones_then_zeros(std::size_t ones, std::size_t zeros) {
  std::vector<std::uint8_t> v(ones, 1);
  v.resize(ones + zeros, 0);
  return v;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("SRS: 153 of 174 correct") {
    const auto labels = ones_then_zeros(153, 21);
    const auto e = est_srs(labels, 0.05);
    CHECK(e.mu_hat == doctest::Approx(0.879).epsilon(1e-3));
    CHECK(e.moe == doctest::Approx(0.0484).epsilon(2e-3));
    CHECK(e.n_units == 174);
    CHECK(e.ci_lo == doctest::Approx(e.mu_hat - e.moe));
    CHECK(e.ci_hi == doctest::Approx(e.mu_hat + e.moe));
  }

  TEST_CASE("SRS small cases") {
    const std::vector<std::uint8_t> mixed{1, 0};
    const auto e = est_srs(mixed, 0.05);
    CHECK(e.mu_hat == 0.5);
    CHECK(e.variance_hat == doctest::Approx(0.125));

    const auto all = est_srs(ones_then_zeros(40, 0), 0.05);
    CHECK(all.mu_hat == 1.0);
    CHECK(all.degenerate);
    CHECK(all.moe == 0.0);
    CHECK(all.ci_hi == 1.0);

    // one cluster draw: no between-draw variance
    const std::vector<double> single{0.8};
    const auto one = est_wcs(single, 0.05);
    CHECK(one.mu_hat == 0.8);
    CHECK(std::isinf(one.moe));
    CHECK_FALSE(one.variance_defined());
    const std::vector<double> tau{3};
    CHECK(std::isinf(est_rcs(tau, 2, 4, 0.05).moe));
    CHECK_THROWS_AS(est_srs(std::span<const std::uint8_t>{}, 0.05), ValidationError);
  }

  TEST_CASE("WCS and TWCS") {
    const std::vector<double> mu{0.5, 1.0};
    const auto w = est_wcs(mu, 0.05);
    CHECK(w.mu_hat == 0.75);
    CHECK(w.variance_hat == doctest::Approx(0.0625));
    CHECK(w.moe == doctest::Approx(1.959963984540054 * 0.25));
    const auto t = est_twcs(mu, 0.05);
    CHECK(t.mu_hat == w.mu_hat);
    CHECK(t.variance_hat == w.variance_hat);
  }

  TEST_CASE("RCS") {
    // N = 4 clusters, M = 10 triples, two draws with 2 and 3 correct
    const std::vector<double> tau{2, 3};
    const auto e = est_rcs(tau, 4, 10, 0.05);
    CHECK(e.mu_hat == doctest::Approx(4.0 * 5 / (10 * 2)));
    // (N/M tau_k - mu)^2: (0.8 - 1)^2 + (1.2 - 1)^2 over n(n-1) = 2
    CHECK(e.variance_hat == doctest::Approx(0.04));
  }

  TEST_CASE("stratified") {
    const auto a = est_srs(ones_then_zeros(9, 1), 0.05);
    const auto b = est_srs(ones_then_zeros(8, 2), 0.05);
    const std::vector<std::pair<double, Estimate>> strata{{2.0 / 3.0, a}, {1.0 / 3.0, b}};
    const auto e = est_stratified(strata);
    CHECK(e.mu_hat == doctest::Approx(0.8667).epsilon(1e-4));
    CHECK(e.variance_hat ==
          doctest::Approx(4.0 / 9 * a.variance_hat + 1.0 / 9 * b.variance_hat).epsilon(1e-12));
    CHECK(e.n_units == 20);

    const std::vector<std::pair<double, Estimate>> bad{{0.5, a}, {0.4, b}};
    CHECK_THROWS_AS(est_stratified(bad), ValidationError);
    const std::vector<double> single{0.7};
    const std::vector<std::pair<double, Estimate>> undefined{{0.5, a}, {0.5, est_twcs(single, 0.05)}};
    CHECK_THROWS_AS(est_stratified(undefined), ValidationError);
  }

  TEST_CASE("point templates") {
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(mean_of<double>(x) == 2.5);
    CHECK(rcs_point<double>(x, 2, 5) == doctest::Approx(2.0 * 10 / (5 * 4)));
    const std::vector<std::pair<double, double>> wm{{0.25, 1.0}, {0.75, 0.5}};
    CHECK(stratified_point<double>(wm) == 0.625);
  }

  TEST_CASE("estimates from annotated draws") {
    const auto g = synth::build_graph(std::vector<std::uint32_t>{2, 4});
    auto batch = twcs_draw(g, 2, 2, 3);
    for (auto& d : batch.draws) {
      d.labels.assign(d.triples.size(), 0);
      d.labels[0] = 1;
    }
    const auto e = estimate_draws(DesignKind::twcs, batch.draws, g, 0.05);
    CHECK(e.mu_hat == 0.5);
    CHECK(e.n_units == 2);
    const auto fp = footprint_of(g, batch.draws);
    CHECK(fp.unique_entities <= 2);
    CHECK(fp.triples <= 4);
  }

  TEST_CASE("json round trip") {
    const auto e = est_srs(ones_then_zeros(30, 4), 0.1);
    const auto back = estimate_from_json(to_json(e));
    CHECK(back.mu_hat == e.mu_hat);
    CHECK(back.moe == e.moe);
    CHECK(back.alpha == e.alpha);
    CHECK(back.n_units == e.n_units);
    const std::vector<double> single{0.5};
    const auto inf = estimate_from_json(to_json(est_wcs(single, 0.05)));
    CHECK(std::isinf(inf.moe));
  }
}
