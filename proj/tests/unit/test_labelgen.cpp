#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "kgacc/errors.hpp"
#include "kgacc/labelgen.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;

namespace {

KnowledgeGraph synthetic(std::size_t triples, std::uint64_t seed = 3) {
  return synth::build_graph(synth::draw_sizes_for_triples(triples, {}, seed));
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("labelgen") {
  TEST_CASE("REM extremes") {
    const auto g = synthetic(2000);
    CHECK(true_accuracy(g, gen_rem(g, 0.0, 1)) == 1.0);
    CHECK(true_accuracy(g, gen_rem(g, 1.0, 1)) == 0.0);
    CHECK_THROWS_AS(gen_rem(g, 1.5, 1), ValidationError);
    CHECK_THROWS_AS(gen_rem(g, -0.1, 1), ValidationError);
  }

  TEST_CASE("REM accuracy near 1 - r on a large graph") {
    const auto g = synthetic(130000);
    const double mu = true_accuracy(g, gen_rem(g, 0.1, 11));
    const double se = std::sqrt(0.09 / 130000.0);
    CHECK(std::abs(mu - 0.9) < 3 * se);
  }

  TEST_CASE("REM mean over seeds") {
    const auto g = synthetic(1000);
    double sum = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) sum += true_accuracy(g, gen_rem(g, 0.2, s));
    const double se = std::sqrt(0.2 * 0.8 / 1000.0) / std::sqrt(1000.0);
    CHECK(std::abs(sum / 1000.0 - 0.8) < 3 * se);
  }

  TEST_CASE("generation is deterministic and stable under growth") {
    const auto g = synthetic(5000);
    CHECK(gen_rem(g, 0.1, 5).labels == gen_rem(g, 0.1, 5).labels);
    CHECK(gen_bmm(g, {}, 5).labels == gen_bmm(g, {}, 5).labels);
    CHECK(gen_rem(g, 0.1, 5).labels != gen_rem(g, 0.1, 6).labels);

    const auto d = synth::build_delta(g, 700, 1, 0.3, {}, 9);
    const auto g2 = apply_delta(g, d, DeltaMode::independent);
    const auto full = gen_rem(g2, 0.1, 5);
    const auto base = gen_rem(g, 0.1, 5);
    CHECK(std::equal(base.labels.begin(), base.labels.end(), full.labels.begin()));
    auto ext = base;
    extend_rem(ext, g2, 0.1, 5);
    CHECK(ext.labels == full.labels);
  }

  TEST_CASE("BMM probability") {
    CHECK(bmm_probability(3, {3, 0.01, 0.0}, 0.0) == 0.5);
    CHECK(bmm_probability(1, {3, 0.01, 0.0}, 0.0) == 0.5);
    CHECK(bmm_probability(100000, {3, 5.0, 0.0}, 0.0) == doctest::Approx(1.0));
    CHECK(bmm_probability(10, {3, 0.0, 0.0}, 0.0) == 0.5);
    CHECK(bmm_probability(10, {3, 0.01, 0.0}, 0.9) == 1.0);  // clamped
    CHECK(bmm_probability(1, {3, 0.01, 0.0}, -0.9) == 0.0);
    CHECK_THROWS_AS(BmmParams({0, 0.01, 0.1}).validate(), ValidationError);
    CHECK_THROWS_AS(BmmParams({3, -1.0, 0.1}).validate(), ValidationError);
    CHECK_THROWS_AS(BmmParams({3, 0.01, -0.1}).validate(), ValidationError);
  }

  TEST_CASE("BMM accuracy rises with cluster size") {
    const auto g = synth::build_graph(synth::draw_sizes(10000, {}, 21));
    const auto ls = gen_bmm(g, {}, 4);
    const auto mu = cluster_accuracies(g, ls);
    std::vector<double> sizes;
    for (auto s : g.cluster_sizes()) sizes.push_back(s);
    const double rho = pearson(ranks(sizes), ranks(mu));
    // t statistic for rank correlation; 2.58 is the two-sided 1% point
    const double t = rho * std::sqrt((10000.0 - 2) / (1 - rho * rho));
    CHECK(rho > 0);
    CHECK(t > 2.58);
  }

  TEST_CASE("true accuracy and coverage") {
    std::istringstream in("A\tp\t1\nA\tp\t2\nB\tp\t3\nB\tp\t4\nB\tp\t5\nC\tp\t6\n");
    const auto g = parse_graph(in);
    LabelSource ls;
    ls.labels = {1, 1, 0, 1, 1, 0};
    CHECK(true_accuracy(g, ls) == doctest::Approx(4.0 / 6.0));
    ls.labels = {1, 1, 1, 1, 1, 1};
    CHECK(true_accuracy(g, ls) == 1.0);
    ls.labels = {1, 1, 1};
    try {
      true_accuracy(g, ls);
      FAIL("expected a coverage error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("3") != std::string::npos);
    }
  }

  TEST_CASE("NELL fixture gold labels") {
    const auto path = std::filesystem::path(KGACC_DATA_DIR) / "nell_fixture.tsv";
    const auto g = ingest(path);
    const auto ls = read_fixture_labels(path);
    CHECK(ls.size() == 1860);
    CHECK(true_accuracy(g, ls) == doctest::Approx(1693.0 / 1860.0));
    CHECK(std::round(true_accuracy(g, ls) * 100) == 91);
  }

  TEST_CASE("label file round trip is bound to the graph") {
    const auto g = synthetic(300);
    const auto ls = gen_bmm(g, {}, 2);
    std::stringstream buf;
    write_labels(ls, g, buf);
    const auto back = read_labels(buf, g);
    CHECK(back.labels == ls.labels);

    const auto other = synthetic(300, 99);
    std::stringstream buf2;
    write_labels(ls, g, buf2);
    CHECK_THROWS_AS(read_labels(buf2, other), ChecksumError);
  }
}
