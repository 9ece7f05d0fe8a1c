#include <doctest.h>

#include <chrono>
#include <filesystem>

#include "kgacc/annotation.hpp"
#include "kgacc/errors.hpp"
#include "kgacc/labelgen.hpp"
#include "kgacc/session.hpp"
#include "kgacc/synth.hpp"

using namespace kgacc;

namespace {

// Oracle that fails on call number `fail_at` (1-based).
class FlakyBackend final : public AnnotationBackend {
 public:
  FlakyBackend(const LabelSource& ls, std::size_t fail_at) : oracle_(ls), fail_at_(fail_at) {}
  std::string_view kind() const noexcept override { return "flaky"; }
  std::vector<std::vector<std::uint8_t>> annotate(const KnowledgeGraph& g,
                                                  std::span<const AnnotationRequest> requests) override {
    if (++calls_ == fail_at_) throw BackendError("annotator went away");
    return oracle_.annotate(g, requests);
  }

 private:
  OracleBackend oracle_;
  std::size_t fail_at_;
  std::size_t calls_ = 0;
};

struct Fixture {
  KnowledgeGraph g = synth::build_graph(synth::draw_sizes_for_triples(20000, {}, 3));
  LabelSource ls = gen_bmm(g, {}, 4);
};

SessionConfig twcs_cfg(std::uint64_t seed) {
  SessionConfig c;
  c.design = {DesignKind::twcs, 3};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("session") {
  TEST_CASE("config validation and json") {
    SessionConfig c;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = twcs_cfg(9);
    c.req.epsilon = 0.03;
    const auto back = session_config_from_json(to_json(c));
    CHECK(back.seed == 9);
    CHECK(back.design.m == 3);
    CHECK(back.req.epsilon == 0.03);
  }

  TEST_CASE("a loose requirement stops at min_units") {
    Fixture f;
    OracleBackend oracle(f.ls);
    auto cfg = twcs_cfg(1);
    cfg.req.epsilon = 0.5;
    const auto r = run_static(f.g, cfg, oracle);
    CHECK(r.session->status() == SessionStatus::satisfied);
    CHECK(r.session->units() == 30);
    CHECK(r.session->batches() == 3);
  }

  TEST_CASE("every design reaches the target") {
    Fixture f;
    const double truth = true_accuracy(f.g, f.ls);
    for (auto k : {DesignKind::srs, DesignKind::rcs, DesignKind::wcs, DesignKind::twcs,
                   DesignKind::stratified_twcs}) {
      OracleBackend oracle(f.ls);
      auto cfg = twcs_cfg(5);
      cfg.design.kind = k;
      const auto r = run_static(f.g, cfg, oracle);
      CAPTURE(to_string(k));
      CHECK(r.session->status() == SessionStatus::satisfied);
      CHECK(r.estimate.moe <= 0.05);
      CHECK(r.estimate.n_units >= 30);
      CHECK(std::abs(r.estimate.mu_hat - truth) < 0.15);
      CHECK(r.cost.seconds == doctest::Approx(45.0 * r.cost.footprint.unique_entities +
                                              25.0 * r.cost.footprint.triples));
      const auto again = r.session->recompute();
      CHECK(again.mu_hat == doctest::Approx(r.estimate.mu_hat).epsilon(1e-12));
      CHECK(again.moe == doctest::Approx(r.estimate.moe).epsilon(1e-12));
    }
  }

  TEST_CASE("no triple is requested twice") {
    Fixture f;
    OracleBackend oracle(f.ls);
    const auto r = run_static(f.g, twcs_cfg(2), oracle);
    CHECK(oracle.requested_triples() == r.cost.footprint.triples);
  }

  TEST_CASE("abort and resume give the uninterrupted result") {
    Fixture f;
    OracleBackend clean(f.ls);
    const auto ref = run_static(f.g, twcs_cfg(8), clean);
    REQUIRE(ref.session->batches() > 3);

    FlakyBackend flaky(f.ls, 3);
    const auto broken = run_static(f.g, twcs_cfg(8), flaky);
    CHECK(broken.session->status() == SessionStatus::aborted);
    CHECK(broken.session->abort_reason().rfind("backend: ", 0) == 0);
    const auto archive = broken.session->archive();

    auto resumed = Session::resume(f.g, archive);
    OracleBackend oracle(f.ls);
    drive(resumed, oracle);
    CHECK(resumed.status() == SessionStatus::satisfied);
    CHECK(resumed.estimate().mu_hat == ref.estimate.mu_hat);
    CHECK(resumed.estimate().moe == ref.estimate.moe);
    CHECK(resumed.batches() == ref.session->batches());
    CHECK(resumed.cost().seconds == ref.cost.seconds);

    // a satisfied session resumes as satisfied and asks for nothing
    auto done = Session::resume(f.g, ref.session->archive());
    OracleBackend idle(f.ls);
    drive(done, idle);
    CHECK(done.status() == SessionStatus::satisfied);
    CHECK(idle.requested_triples() == 0);
    CHECK(done.estimate().mu_hat == ref.estimate.mu_hat);
  }

  TEST_CASE("resume against another graph fails the checksum") {
    Fixture f;
    OracleBackend oracle(f.ls);
    const auto r = run_static(f.g, twcs_cfg(3), oracle);
    const auto other = synth::build_graph(synth::draw_sizes_for_triples(20000, {}, 99));
    CHECK_THROWS_AS(Session::resume(other, r.session->archive()), ChecksumError);
  }

  TEST_CASE("step-wise protocol") {
    Fixture f;
    Session s(f.g, twcs_cfg(4));
    CHECK(s.status() == SessionStatus::sampling);
    const auto reqs = s.next_batch();
    CHECK(s.status() == SessionStatus::awaiting_annotations);
    CHECK(reqs.size() == 10);
    CHECK_FALSE(s.batch_complete());
    for (const auto& r : s.pending_requests())
      for (auto p : r.triples) s.submit(p, f.ls[p]);
    CHECK(s.batch_complete());
    // same label again is fine; a different one is not
    const auto p0 = reqs.front().triples.front();
    s.submit(p0, f.ls[p0]);
    CHECK_THROWS_AS(s.submit(p0, static_cast<std::uint8_t>(1 - f.ls[p0])), ValidationError);
    s.complete_batch();
    CHECK(s.has_estimate());
    CHECK(s.status() == SessionStatus::sampling);
  }

  TEST_CASE("max units aborts") {
    Fixture f;
    OracleBackend oracle(f.ls);
    auto cfg = twcs_cfg(1);
    cfg.req.epsilon = 0.001;
    cfg.max_units = 40;
    const auto r = run_static(f.g, cfg, oracle);
    CHECK(r.session->status() == SessionStatus::aborted);
    CHECK(r.session->units() <= 40);
  }

  TEST_CASE("file backend timeout aborts") {
    Fixture f;
    const auto dir = std::filesystem::temp_directory_path() / "kgacc_session_file_backend";
    std::filesystem::remove_all(dir);
    FileBackend fb(dir, std::chrono::milliseconds(100), std::chrono::milliseconds(20));
    const auto r = run_static(f.g, twcs_cfg(1), fb);
    CHECK(r.session->status() == SessionStatus::aborted);
    CHECK(std::filesystem::exists(dir / "tasks.tsv"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("variance floor") {
    Estimate e;
    e.mu_hat = 1.0;
    e.n_units = 10;
    e.variance_hat = 0.0;
    apply_variance_floor(e);
    CHECK(e.variance_hat == doctest::Approx(1.0 / 400.0));
    CHECK(e.moe > 0.0);
  }
}
