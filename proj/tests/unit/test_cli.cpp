#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgacc/cli.hpp"
#include "kgacc/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kNell = std::string(KGACC_DATA_DIR) + "/nell_fixture.tsv";

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kgacc");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  CliRun r;
  r.code = kgacc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("kgacc_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("exit code mapping") {
    using namespace kgacc;
    CHECK(cli::exit_code_for(ValidationError("x")) == cli::config);
    CHECK(cli::exit_code_for(ParseError("x", 3)) == cli::parse);
    CHECK(cli::exit_code_for(ChecksumError("x")) == cli::integrity);
    CHECK(cli::exit_code_for(VersionError("x")) == cli::integrity);
    CHECK(cli::exit_code_for(BackendError("x")) == cli::backend);
    CHECK(cli::exit_code_for(std::runtime_error("x")) == cli::failure);
  }

  TEST_CASE("usage errors") {
    CHECK(run_cli({}).code == kgacc::cli::config);
    CHECK(run_cli({"no-such-command"}).code == kgacc::cli::config);
    CHECK(run_cli({"--help"}).code == kgacc::cli::ok);
    TempDir d("usage");
    CHECK(run_cli({"evaluate", "--out-dir", d.str(), "--graph", kNell, "--fixture-labels", "--design", "srs",
                   "--m", "3"})
              .code == kgacc::cli::config);
    CHECK(run_cli({"evaluate", "--out-dir", d.str(), "--graph", kNell}).code == kgacc::cli::config);
    CHECK(run_cli({"ingest", "--out-dir", d.str(), "--graph", (d.path / "missing.tsv").string()}).code != 0);
  }

  TEST_CASE("ingest and snapshot") {
    TempDir d("ingest");
    const auto snap = (d.path / "nell.kgs").string();
    const auto r = run_cli({"ingest", "--out-dir", d.str(), "--graph", kNell, "--snapshot", snap});
    REQUIRE(r.code == 0);
    const auto rep = read_json(d.path / "ingest.json");
    CHECK(rep["triples"] == 1860);
    CHECK(rep["clusters"] == 817);
    CHECK(fs::exists(snap));
    CHECK(run_cli({"ingest", "--out-dir", d.str(), "--graph", snap}).code == 0);

    // a flipped payload byte is an integrity failure
    {
      std::fstream f(snap, std::ios::in | std::ios::out | std::ios::binary);
      f.seekg(40);
      char c = 0;
      f.read(&c, 1);
      c = static_cast<char>(c ^ 0x5a);
      f.seekp(40);
      f.write(&c, 1);
    }
    CHECK(run_cli({"ingest", "--out-dir", d.str(), "--graph", snap}).code == kgacc::cli::integrity);

    const auto bad = d.path / "bad.tsv";
    std::ofstream(bad) << "a\tb\tc\nonly_two\tcolumns\n";
    CHECK(run_cli({"ingest", "--out-dir", d.str(), "--graph", bad.string()}).code == kgacc::cli::parse);
  }

  TEST_CASE("evaluate writes a report and an archive") {
    TempDir d("evaluate");
    const auto r = run_cli({"evaluate", "--out-dir", d.str(), "--graph", kNell, "--fixture-labels", "--design",
                            "twcs", "--m", "3", "--seed", "11"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("status=satisfied") != std::string::npos);
    const auto rep = read_json(d.path / "evaluate.json");
    CHECK(rep["run_config"]["session"]["seed"] == 11);
    CHECK(rep["estimate"]["moe"].get<double>() <= 0.05);
    CHECK(fs::exists(d.path / "session_archive.json"));
    // resuming a finished archive reproduces the estimate
    TempDir d2("evaluate_resume");
    REQUIRE(run_cli({"evaluate", "--out-dir", d2.str(), "--graph", kNell, "--fixture-labels", "--resume",
                     (d.path / "session_archive.json").string()})
                .code == 0);
    CHECK(read_json(d2.path / "evaluate.json")["estimate"] == rep["estimate"]);
  }

  TEST_CASE("file backend timeout is a backend failure") {
    TempDir d("file_backend");
    const auto r = run_cli({"evaluate", "--out-dir", d.str(), "--graph", kNell, "--backend", "file",
                            "--backend-dir", (d.path / "tasks").string(), "--timeout", "0.2"});
    CHECK(r.code == kgacc::cli::backend);
    CHECK(fs::exists(d.path / "session_archive.json"));
  }

  TEST_CASE("gen-labels, optimal-m and fit-cost") {
    TempDir d("labels");
    REQUIRE(run_cli({"gen-labels", "--out-dir", d.str(), "--synthetic-triples", "5000", "--gen", "rem", "--r-eps",
                     "0.2"})
                .code == 0);
    CHECK(fs::exists(d.path / "labels.tsv"));
    CHECK(fs::exists(d.path / "gen_labels.json"));

    REQUIRE(run_cli({"optimal-m", "--out-dir", d.str(), "--graph", kNell, "--fixture-labels"}).code == 0);
    const auto om = read_json(d.path / "optimal_m.json");
    CHECK(om["m"].get<int>() >= 1);
    CHECK(fs::exists(d.path / "optimal_m_sweep.csv"));

    const auto obs = d.path / "obs.csv";
    std::ofstream(obs) << "entities,triples,seconds\n174,174,12708\n24,178,5040\n";
    REQUIRE(run_cli({"fit-cost", "--out-dir", d.str(), "--observations", obs.string()}).code == 0);
    const auto fit = read_json(d.path / "fit_cost.json");
    CHECK(fit["c1"].get<double>() == doctest::Approx(51.69).epsilon(0.01));
    CHECK(fs::exists(d.path / "cost_params.txt"));
    std::ofstream(obs) << "entities,triples,seconds\n174,174,12708\n";
    CHECK(run_cli({"fit-cost", "--out-dir", d.str(), "--observations", obs.string()}).code == kgacc::cli::config);
  }

  TEST_CASE("evolve with a delta file") {
    TempDir d("evolve");
    const auto delta = d.path / "delta1.tsv";
    {
      std::ofstream f(delta);
      for (int e = 0; e < 60; ++e)
        for (int k = 0; k < 3; ++k) f << "new:e" << e << "\tp" << k << "\tv" << k << '\n';
    }
    const auto r = run_cli({"evolve", "--out-dir", d.str(), "--graph", kNell, "--delta", delta.string(), "--gen",
                            "rem", "--method", "all"});
    REQUIRE(r.code == 0);
    for (const char* m : {"baseline", "rs", "ss"}) CHECK(fs::exists(d.path / (std::string("evolve_") + m + ".csv")));
    const auto rep = read_json(d.path / "evolve.json");
    CHECK(rep["runs"].size() == 3);
    CHECK(rep["runs"][0]["steps"].size() == 2);
  }

  TEST_CASE("simulate static and sweep") {
    TempDir d("simulate");
    REQUIRE(run_cli({"simulate", "--out-dir", d.str(), "--graph", kNell, "--fixture-labels", "--experiment",
                     "static", "--trials", "20", "--designs", "srs,twcs"})
                .code == 0);
    const auto rep = read_json(d.path / "simulate.json");
    CHECK(rep.dump().find("twcs") != std::string::npos);
    TempDir d2("sweep");
    REQUIRE(run_cli({"simulate", "--out-dir", d2.str(), "--graph", kNell, "--fixture-labels", "--experiment",
                     "sweep", "--sweep", "m=1..4", "--sweep-trials", "5"})
                .code == 0);
    CHECK(fs::exists(d2.path / "simulate_sweep.csv"));
    CHECK(run_cli({"simulate", "--out-dir", d2.str(), "--graph", kNell, "--fixture-labels", "--experiment", "bogus"})
              .code == kgacc::cli::config);
  }
}
