#include "kgacc/cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "kgacc/annotation.hpp"
#include "kgacc/cost_model.hpp"
#include "kgacc/errors.hpp"
#include "kgacc/evolve.hpp"
#include "kgacc/kg_store.hpp"
#include "kgacc/labelgen.hpp"
#include "kgacc/orchestrator.hpp"
#include "kgacc/service.hpp"
#include "kgacc/session.hpp"
#include "kgacc/simulate.hpp"
#include "kgacc/synth.hpp"

namespace kgacc::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ParseError*>(&e)) return parse;
  if (dynamic_cast<const ChecksumError*>(&e) || dynamic_cast<const VersionError*>(&e)) return integrity;
  if (dynamic_cast<const BackendError*>(&e)) return backend;
  if (dynamic_cast<const ValidationError*>(&e)) return config;
  if (dynamic_cast<const json::exception*>(&e)) return parse;
  return failure;
}

namespace {

// --- shared option groups -----------------------------------------------------

struct GraphOpts {
  std::string path;
  std::string format = "auto";  // auto, tsv, nt, snapshot
  std::size_t synthetic_triples = 0;
  double size_mean = 9.2;
  double size_sigma = 1.6;
  std::uint64_t synthetic_seed = 1;

  void add(CLI::App* app, bool allow_synthetic) {
    app->add_option("--graph", path, "Graph file (TSV, N-Triples, or snapshot)");
    app->add_option("--format", format, "Graph format")->check(CLI::IsMember({"auto", "tsv", "nt", "snapshot"}));
    if (allow_synthetic) {
      app->add_option("--synthetic-triples", synthetic_triples, "Generate a synthetic graph of this many triples");
      app->add_option("--size-mean", size_mean, "Synthetic mean cluster size");
      app->add_option("--size-sigma", size_sigma, "Synthetic log-normal sigma of cluster sizes");
      app->add_option("--synthetic-seed", synthetic_seed, "Seed of the synthetic graph");
    }
  }

  json to_json() const {
    json j = {{"graph", path}, {"format", format}};
    if (synthetic_triples > 0)
      j["synthetic"] = {{"triples", synthetic_triples}, {"size_mean", size_mean}, {"size_sigma", size_sigma},
                        {"seed", synthetic_seed}};
    return j;
  }

  KnowledgeGraph load() const {
    if (synthetic_triples > 0) {
      if (!path.empty()) throw ValidationError("use either --graph or --synthetic-triples, not both");
      synth::SizeProfile p{size_mean, size_sigma, 100000};
      return synth::build_graph(synth::draw_sizes_for_triples(synthetic_triples, p, synthetic_seed));
    }
    if (path.empty()) throw ValidationError("--graph is required");
    return load_path(path, format);
  }

  static KnowledgeGraph load_path(const std::string& path, const std::string& format) {
    std::string f = format;
    if (f == "auto") {
      const auto ext = fs::path(path).extension().string();
      f = ext == ".nt" ? "nt" : (ext == ".snap" || ext == ".kgs") ? "snapshot" : "tsv";
    }
    if (f == "snapshot") return restore(path);
    return ingest(path, f == "nt" ? GraphFormat::ntriples : GraphFormat::tsv);
  }
};

struct LabelOpts {
  std::string file;
  bool fixture = false;
  std::string gen;  // rem, bmm
  double r_eps = 0.1;
  BmmParams bmm;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--labels", file, "Label file written by gen-labels");
    app->add_flag("--fixture-labels", fixture, "Use the label column of the graph TSV");
    app->add_option("--gen", gen, "Generate labels: rem or bmm")->check(CLI::IsMember({"rem", "bmm"}));
    app->add_option("--r-eps", r_eps, "REM error rate");
    app->add_option("--bmm-k", bmm.k, "BMM size threshold k");
    app->add_option("--bmm-c", bmm.c, "BMM slope c");
    app->add_option("--bmm-sigma", bmm.sigma, "BMM noise sigma");
    app->add_option("--label-seed", seed, "Seed of generated labels");
  }

  bool given() const { return !file.empty() || fixture || !gen.empty(); }

  json to_json() const {
    json j = {{"labels", file}, {"fixture_labels", fixture}, {"gen", gen}, {"label_seed", seed}};
    if (gen == "rem") j["r_eps"] = r_eps;
    if (gen == "bmm") j["bmm"] = {{"k", bmm.k}, {"c", bmm.c}, {"sigma", bmm.sigma}};
    return j;
  }

  LabelSource load(const KnowledgeGraph& g, const std::string& graph_path) const {
    const int sources = (!file.empty()) + fixture + (!gen.empty());
    if (sources != 1) throw ValidationError("give exactly one of --labels, --fixture-labels, --gen");
    LabelSource ls;
    if (!file.empty()) ls = read_labels(fs::path(file), g);
    else if (fixture) {
      if (graph_path.empty()) throw ValidationError("--fixture-labels needs --graph");
      ls = read_fixture_labels(graph_path);
    } else if (gen == "rem") ls = gen_rem(g, r_eps, seed);
    else ls = gen_bmm(g, bmm, seed);
    if (!ls.covers(g)) throw ValidationError("labels do not cover every triple of the graph");
    return ls;
  }
};

struct RequirementOpts {
  Requirement req;
  CostParams cost;

  void add(CLI::App* app) {
    app->add_option("--moe", req.epsilon, "Margin of error epsilon");
    app->add_option("--alpha", req.alpha, "1 - confidence level");
    app->add_option("--c1", cost.c1, "Seconds per entity identification");
    app->add_option("--c2", cost.c2, "Seconds per triple validation");
  }
};

fs::path output_dir(const std::string& flag) {
  fs::path dir = flag;
  if (dir.empty()) {
    const char* env = std::getenv("KGACC_OUTPUT_DIR");
    dir = env && *env ? env : "kgacc_out";
  }
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// "m=1..20", "1..20" or "5"
std::pair<std::uint32_t, std::uint32_t> parse_range(std::string s) {
  if (s.rfind("m=", 0) == 0) s = s.substr(2);
  auto num = [&](std::string_view t) {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ValidationError("bad sweep range '" + s + "'");
    return v;
  };
  const auto dots = s.find("..");
  if (dots == std::string::npos) {
    const auto v = num(s);
    return {v, v};
  }
  return {num(std::string_view(s).substr(0, dots)), num(std::string_view(s).substr(dots + 2))};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

SamplingDesign design_from(const std::string& kind, std::uint32_t m, bool m_given) {
  SamplingDesign d;
  d.kind = parse_design_kind(kind);
  const bool two_stage = d.kind == DesignKind::twcs || d.kind == DesignKind::stratified_twcs;
  if (m_given && !two_stage) throw ValidationError("--m applies only to twcs and stratified_twcs");
  d.m = m;
  d.validate();
  return d;
}

double srs_modeled_hours(const KnowledgeGraph& g, double mu, const Requirement& req, const CostParams& cp) {
  const auto n = srs_required_n(mu, req);
  const double ents = expected_unique_entities(g, n);
  return (cp.c1 * ents + cp.c2 * static_cast<double>(n)) / 3600.0;
}

// --- subcommands --------------------------------------------------------------

struct Common {
  std::string out_dir;
  std::uint64_t seed = 1;
};

int cmd_ingest(const Common& c, const GraphOpts& go, const std::string& snap, std::ostream& out) {
  const auto g = go.load();
  const auto st = stats(g);
  json hist = json::object();
  for (const auto& [size, count] : st.size_histogram) hist[std::to_string(size)] = count;
  json report = {{"command", "ingest"},
                 {"config", go.to_json()},
                 {"clusters", st.clusters},
                 {"triples", st.triples},
                 {"entities", g.entity_count()},
                 {"mean_cluster_size", st.mean_cluster_size},
                 {"checksum", g.checksum()},
                 {"size_histogram", hist}};
  if (!snap.empty()) {
    snapshot(g, snap);
    report["snapshot"] = snap;
  }
  const auto dir = output_dir(c.out_dir);
  write_json(dir / "ingest.json", report);
  out << "clusters=" << st.clusters << " triples=" << st.triples << " mean_size=" << st.mean_cluster_size
      << " checksum=" << g.checksum() << '\n';
  return ok;
}

int cmd_gen_labels(const Common& c, const GraphOpts& go, const LabelOpts& lo, std::string output, std::ostream& out) {
  if (lo.gen.empty()) throw ValidationError("gen-labels needs --gen rem or --gen bmm");
  const auto g = go.load();
  const auto ls = lo.load(g, go.path);
  const auto dir = output_dir(c.out_dir);
  if (output.empty()) output = (dir / "labels.tsv").string();
  write_labels(ls, g, fs::path(output));
  const double mu = true_accuracy(g, ls);
  write_json(dir / "gen_labels.json", {{"command", "gen-labels"},
                                       {"config", {{"graph", go.to_json()}, {"labels", lo.to_json()}}},
                                       {"output", output},
                                       {"true_accuracy", mu},
                                       {"graph_checksum", g.checksum()}});
  out << "wrote " << ls.size() << " labels to " << output << " (accuracy " << mu << ")\n";
  return ok;
}

struct EvalOpts {
  std::string design = "twcs";
  std::uint32_t m = 5;
  std::size_t strata = 0;
  std::size_t batch_size = 10;
  std::size_t min_units = 30;
  std::size_t max_units = 1000000;
  std::string backend = "oracle";
  std::string backend_dir;
  double timeout_sec = 3600;
  std::string resume;
};

std::unique_ptr<AnnotationBackend> make_backend(const EvalOpts& eo, const LabelSource* labels) {
  if (eo.backend == "oracle") {
    if (!labels) throw ValidationError("the oracle backend needs a label source");
    return std::make_unique<OracleBackend>(*labels);
  }
  if (eo.backend_dir.empty()) throw ValidationError("the file backend needs --backend-dir");
  return std::make_unique<FileBackend>(eo.backend_dir,
                                       std::chrono::milliseconds(static_cast<long long>(eo.timeout_sec * 1000)));
}

int cmd_evaluate(const Common& c, const GraphOpts& go, const LabelOpts& lo, const RequirementOpts& ro,
                 const EvalOpts& eo, bool m_given, std::ostream& out) {
  const auto g = go.load();
  std::optional<LabelSource> labels;
  if (eo.backend == "oracle" || lo.given()) labels = lo.load(g, go.path);
  auto annot = make_backend(eo, labels ? &*labels : nullptr);

  std::unique_ptr<Session> session;
  if (!eo.resume.empty()) {
    std::ifstream in(eo.resume);
    if (!in) throw ValidationError("cannot open archive " + eo.resume);
    session = std::make_unique<Session>(Session::resume(g, json::parse(in)));
  } else {
    SessionConfig cfg;
    cfg.design = design_from(eo.design, eo.m, m_given);
    cfg.req = ro.req;
    cfg.cost = ro.cost;
    cfg.seed = c.seed;
    cfg.batch_size = eo.batch_size;
    cfg.min_units = eo.min_units;
    cfg.max_units = eo.max_units;
    cfg.strata = eo.strata;
    cfg.validate();
    session = std::make_unique<Session>(g, cfg, "evaluate");
  }
  drive(*session, *annot);

  const auto dir = output_dir(c.out_dir);
  json report = static_report(*session);
  report["command"] = "evaluate";
  report["run_config"] = {{"graph", go.to_json()},
                          {"labels", lo.to_json()},
                          {"backend", eo.backend},
                          {"backend_dir", eo.backend_dir},
                          {"resume", eo.resume},
                          {"session", to_json(session->config())}};
  if (labels) report["true_accuracy"] = true_accuracy(g, *labels);
  write_json(dir / "evaluate.json", report);
  write_json(dir / "session_archive.json", session->archive());

  out << "status=" << to_string(session->status());
  if (session->has_estimate()) {
    const auto& e = session->estimate();
    out << std::fixed << std::setprecision(4) << " mu_hat=" << e.mu_hat << " moe=" << e.moe << " ci=[" << e.ci_lo
        << ", " << e.ci_hi << "] units=" << session->units() << " cost_hours=" << session->cost().hours();
  }
  out << '\n';
  if (session->status() == SessionStatus::aborted) {
    out << "aborted: " << session->abort_reason() << '\n';
    return session->abort_reason().find("backend") != std::string::npos ? ExitCode::backend : ExitCode::failure;
  }
  return ok;
}

struct EvolveOpts {
  std::vector<std::string> deltas;
  std::string method = "ss";
  std::uint32_t m = 3;
  std::size_t batch_size = 10;
  std::size_t batch_cap = 30;
  bool refresh_base = false;
};

int cmd_evolve(const Common& c, const GraphOpts& go, const LabelOpts& lo, const RequirementOpts& ro,
               const EvolveOpts& vo, std::ostream& out) {
  if (lo.fixture) throw ValidationError("evolve takes --labels or --gen for the final graph, not --fixture-labels");
  KnowledgeGraph g = go.load();
  std::vector<std::size_t> marks{g.cluster_count()};
  for (std::size_t k = 0; k < vo.deltas.size(); ++k) {
    g = apply_delta(g, read_delta(vo.deltas[k], static_cast<std::uint32_t>(k + 1)), DeltaMode::independent);
    marks.push_back(g.cluster_count());
  }
  const auto labels = lo.load(g, "");
  const auto versions = GraphVersions::from_marks(g, marks);

  EvolveConfig cfg;
  cfg.m = vo.m;
  cfg.req = ro.req;
  cfg.cost = ro.cost;
  cfg.seed = c.seed;
  cfg.batch_size = vo.batch_size;
  cfg.batch_cap = vo.batch_cap;
  cfg.refresh_base = vo.refresh_base;
  cfg.validate();

  std::vector<EvolveMethod> methods;
  if (vo.method == "all") methods = {EvolveMethod::baseline, EvolveMethod::rs, EvolveMethod::ss};
  else methods = {parse_evolve_method(vo.method)};

  const auto dir = output_dir(c.out_dir);
  json report = {{"command", "evolve"},
                 {"run_config",
                  {{"graph", go.to_json()}, {"deltas", vo.deltas}, {"labels", lo.to_json()}, {"evolve", to_json(cfg)}}},
                 {"runs", json::array()}};
  for (auto method : methods) {
    OracleBackend oracle(labels);
    const auto run = run_evolving(versions, method, cfg, oracle);
    auto csv = open_out(dir / ("evolve_" + std::string(to_string(method)) + ".csv"));
    write_trace_csv(run, csv);
    json steps = json::array();
    for (std::size_t k = 0; k < run.steps.size(); ++k) {
      auto s = to_json(run.steps[k]);
      s["true_accuracy"] = prefix_accuracy(labels, versions.triples[k]);
      steps.push_back(std::move(s));
    }
    report["runs"].push_back({{"method", to_string(method)},
                              {"total_hours", run.total_seconds() / 3600.0},
                              {"update_hours", run.update_seconds() / 3600.0},
                              {"steps", steps}});
    const auto& last = run.steps.back().estimate;
    out << to_string(method) << ": versions=" << run.steps.size() << std::fixed << std::setprecision(4)
        << " final mu_hat=" << last.mu_hat << " moe=" << last.moe << " total_hours=" << run.total_seconds() / 3600.0
        << '\n';
  }
  write_json(dir / "evolve.json", report);
  return ok;
}

int cmd_fit_cost(const Common& c, const std::string& observations, std::ostream& out) {
  if (observations.empty()) throw ValidationError("--observations is required");
  const auto obs = read_observations(fs::path(observations));
  const auto cp = fit_params(obs);
  const auto dir = output_dir(c.out_dir);
  {
    auto f = open_out(dir / "cost_params.txt");
    write_params(cp, f);
  }
  write_json(dir / "fit_cost.json", {{"command", "fit-cost"},
                                     {"run_config", {{"observations", observations}}},
                                     {"rows", obs.size()},
                                     {"c1", cp.c1},
                                     {"c2", cp.c2}});
  out << std::fixed << std::setprecision(3) << "c1=" << cp.c1 << " c2=" << cp.c2 << " (" << obs.size()
      << " observations)\n";
  return ok;
}

int cmd_optimal_m(const Common& c, const GraphOpts& go, const LabelOpts& lo, const RequirementOpts& ro,
                  std::uint32_t m_max, std::ostream& out) {
  auto g = go.load();
  AccuracyProfile profile;
  std::string source;
  if (lo.given()) {
    profile = AccuracyProfile::from_labels(g, lo.load(g, go.path));
    source = "labels";
  } else {
    const auto sizes = g.cluster_sizes();
    profile = AccuracyProfile::constant(sizes);
    source = "worst_case_0.5";
  }
  ro.req.validate();
  ro.cost.validate();
  const auto opt = optimal_m(profile, ro.req, ro.cost, 1, m_max);
  const double srs_h = srs_modeled_hours(g, profile.overall(), ro.req, ro.cost);
  const auto dir = output_dir(c.out_dir);
  {
    auto csv = open_out(dir / "optimal_m_sweep.csv");
    csv << "m,n,variance,cost_hours\n";
    csv.precision(10);
    for (const auto& mc : opt.sweep) csv << mc.m << ',' << mc.n << ',' << mc.variance << ',' << mc.cost / 3600.0 << '\n';
  }
  write_json(dir / "optimal_m.json", {{"command", "optimal-m"},
                                      {"run_config",
                                       {{"graph", go.to_json()},
                                        {"labels", lo.to_json()},
                                        {"profile", source},
                                        {"epsilon", ro.req.epsilon},
                                        {"alpha", ro.req.alpha},
                                        {"c1", ro.cost.c1},
                                        {"c2", ro.cost.c2},
                                        {"m_max", m_max}}},
                                      {"m", opt.best.m},
                                      {"n", opt.best.n},
                                      {"variance", opt.best.variance},
                                      {"twcs_hours", opt.best.cost / 3600.0},
                                      {"srs_hours", srs_h},
                                      {"accuracy", profile.overall()}});
  out << "m*=" << opt.best.m << " n=" << opt.best.n << std::fixed << std::setprecision(3)
      << " twcs_hours=" << opt.best.cost / 3600.0 << " srs_hours=" << srs_h << '\n';
  return ok;
}

struct SimOpts {
  std::string experiment = "static";
  std::size_t trials = 100;
  unsigned threads = 0;
  std::string designs = "srs,twcs";
  std::uint32_t m = 0;  // 0: optimal m from the true accuracy profile
  std::string sweep = "m=1..20";
  std::size_t sweep_trials = 0;
  std::size_t base_triples = 100000;
  std::vector<double> delta_fractions{0.1};
  std::size_t updates = 0;  // > 0: repeat the first fraction this many times
  double base_error = 0.1;
  double update_error = 0.1;
  double existing_share = 0.3;
  std::string methods = "baseline,rs,ss";
  std::uint32_t evolve_m = 3;
};

int cmd_simulate(const Common& c, const GraphOpts& go, const LabelOpts& lo, const RequirementOpts& ro,
                 const SimOpts& so, std::ostream& out) {
  const unsigned threads = so.threads ? so.threads : sim::default_threads();
  const auto dir = output_dir(c.out_dir);
  json report = {{"command", "simulate"},
                 {"run_config",
                  {{"experiment", so.experiment},
                   {"trials", so.trials},
                   {"seed", c.seed},
                   {"graph", go.to_json()},
                   {"labels", lo.to_json()},
                   {"epsilon", ro.req.epsilon},
                   {"alpha", ro.req.alpha},
                   {"c1", ro.cost.c1},
                   {"c2", ro.cost.c2}}}};

  if (so.experiment == "evolving") {
    sim::ScenarioSpec spec;
    spec.base_triples = so.base_triples;
    spec.base_error = so.base_error;
    spec.delta_error = so.update_error;
    spec.existing_share = so.existing_share;
    spec.seed = go.synthetic_seed;
    spec.profile = {go.size_mean, go.size_sigma, 100000};
    const auto base = static_cast<double>(so.base_triples);
    if (so.updates > 0) {
      if (so.delta_fractions.empty()) throw ValidationError("--delta-fraction is required");
      spec.delta_triples.assign(so.updates, static_cast<std::size_t>(std::llround(so.delta_fractions.front() * base)));
    } else {
      for (double f : so.delta_fractions) spec.delta_triples.push_back(static_cast<std::size_t>(std::llround(f * base)));
    }
    const auto sc = sim::build_scenario(spec);
    EvolveConfig cfg;
    cfg.m = so.evolve_m;
    cfg.req = ro.req;
    cfg.cost = ro.cost;
    report["run_config"]["scenario"] = {{"base_triples", spec.base_triples},
                                        {"delta_triples", spec.delta_triples},
                                        {"base_error", spec.base_error},
                                        {"update_error", spec.delta_error},
                                        {"existing_share", spec.existing_share},
                                        {"seed", spec.seed}};
    report["runs"] = json::array();
    for (const auto& name : split_list(so.methods)) {
      const auto method = parse_evolve_method(name);
      const auto t = sim::evolving_trials(*sc, method, cfg, so.trials, c.seed, threads);
      auto csv = open_out(dir / ("simulate_evolving_" + name + ".csv"));
      sim::write_evolving_csv(t, csv);
      report["runs"].push_back(t.to_json());
      const auto total = t.total_hours();
      out << name << ": total_hours=" << std::fixed << std::setprecision(3) << total.mean << " +- " << total.sd
          << " update_hours=" << t.update_hours().mean << " unsound_steps=" << t.unsound_steps() << '\n';
    }
    write_json(dir / "simulate.json", report);
    return ok;
  }

  const auto g = go.load();
  LabelOpts lo2 = lo;
  if (!lo2.given()) lo2.gen = "bmm";
  const auto labels = lo2.load(g, go.path);
  report["run_config"]["labels"] = lo2.to_json();
  const double mu = true_accuracy(g, labels);
  report["true_accuracy"] = mu;

  SessionConfig base;
  base.req = ro.req;
  base.cost = ro.cost;

  if (so.experiment == "static") {
    report["designs"] = json::array();
    for (const auto& name : split_list(so.designs)) {
      SessionConfig cfg = base;
      cfg.design.kind = parse_design_kind(name);
      if (cfg.design.kind == DesignKind::twcs || cfg.design.kind == DesignKind::stratified_twcs) {
        cfg.design.m = so.m;
        if (so.m == 0) cfg.design.m = optimal_m(AccuracyProfile::from_labels(g, labels), ro.req, ro.cost).best.m;
      }
      const auto t = sim::static_trials(g, labels, cfg, so.trials, c.seed, threads);
      auto j = t.to_json();
      j["design"] = name;
      j["m"] = cfg.design.m;
      report["designs"].push_back(j);
      const auto e = t.estimates(), h = t.hours();
      out << std::left << std::setw(16) << name << std::fixed << std::setprecision(4) << " estimate=" << e.mean
          << " +- " << e.sd << std::setprecision(3) << "  hours=" << h.mean << " +- " << h.sd
          << "  unsound=" << t.unsound() << '\n';
    }
  } else if (so.experiment == "sweep") {
    const auto [lo_m, hi_m] = parse_range(so.sweep);
    const auto rows = sim::m_sweep(g, labels, base, lo_m, hi_m, so.sweep_trials, c.seed, threads);
    auto csv = open_out(dir / "simulate_sweep.csv");
    sim::write_sweep_csv(rows, csv);
    json jr = json::array();
    const sim::SweepRow* best = &rows.front();
    for (const auto& r : rows) {
      jr.push_back({{"m", r.m}, {"predicted_n", r.predicted_n}, {"predicted_hours", r.predicted_hours},
                    {"sim_hours", r.hours.to_json()}});
      if (r.predicted_hours < best->predicted_hours) best = &r;
    }
    report["sweep"] = jr;
    report["best_m"] = best->m;
    out << "sweep m=" << lo_m << ".." << hi_m << " best m=" << best->m << std::fixed << std::setprecision(3)
        << " predicted_hours=" << best->predicted_hours << '\n';
  } else {
    throw ValidationError("unknown experiment '" + so.experiment + "' (static, sweep, evolving)");
  }
  write_json(dir / "simulate.json", report);
  return ok;
}

int cmd_serve(const GraphOpts& go, std::string name, const std::string& host, int port, long lease_ttl,
              std::ostream& out) {
  auto g = std::make_shared<const KnowledgeGraph>(go.load());
  if (name.empty()) name = go.path.empty() ? "synthetic" : fs::path(go.path).stem().string();
  ServiceOptions opts;
  opts.lease_ttl = std::chrono::seconds(lease_ttl);
  AnnotationService svc(opts);
  svc.add_graph(name, g);
  auto srv = make_http_server(svc);
  out << "serving graph '" << name << "' (" << g->triple_count() << " triples) on http://" << host << ':' << port
      << std::endl;
  if (!srv->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  return ok;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge graph accuracy evaluation by sampling and annotation"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--out-dir", common.out_dir, "Output directory (default $KGACC_OUTPUT_DIR or ./kgacc_out)");
  app.add_option("--seed", common.seed, "Root seed");

  GraphOpts g_ingest, g_labels, g_eval, g_evolve, g_optm, g_sim, g_serve;
  LabelOpts l_labels, l_eval, l_evolve, l_optm, l_sim;
  RequirementOpts r_eval, r_evolve, r_optm, r_sim;

  auto* ingest_cmd = app.add_subcommand("ingest", "Parse a graph, report statistics, optionally snapshot it");
  g_ingest.add(ingest_cmd, false);
  std::string snap;
  ingest_cmd->add_option("--snapshot", snap, "Write a binary snapshot to this path");

  auto* labels_cmd = app.add_subcommand("gen-labels", "Generate synthetic labels (REM or BMM)");
  g_labels.add(labels_cmd, true);
  l_labels.add(labels_cmd);
  std::string labels_out;
  labels_cmd->add_option("--output", labels_out, "Label file path (default <out-dir>/labels.tsv)");

  auto* eval_cmd = app.add_subcommand("evaluate", "Static evaluation until MoE <= epsilon");
  g_eval.add(eval_cmd, true);
  l_eval.add(eval_cmd);
  r_eval.add(eval_cmd);
  EvalOpts eo;
  auto* m_opt = eval_cmd->add_option("--m", eo.m, "Second-stage size (twcs, stratified_twcs)");
  eval_cmd->add_option("--design", eo.design, "srs, rcs, wcs, twcs, stratified_twcs");
  eval_cmd->add_option("--strata", eo.strata, "Number of strata (stratified_twcs; 0 = default)");
  eval_cmd->add_option("--batch-size", eo.batch_size, "Primary units per iteration");
  eval_cmd->add_option("--min-units", eo.min_units, "Units required before the stopping rule applies");
  eval_cmd->add_option("--max-units", eo.max_units, "Abort after this many units");
  eval_cmd->add_option("--backend", eo.backend, "oracle or file")->check(CLI::IsMember({"oracle", "file"}));
  eval_cmd->add_option("--backend-dir", eo.backend_dir, "Directory of the file backend");
  eval_cmd->add_option("--timeout", eo.timeout_sec, "File backend timeout in seconds");
  eval_cmd->add_option("--resume", eo.resume, "Continue from a session archive");

  auto* evolve_cmd = app.add_subcommand("evolve", "Evaluate a base graph and its update batches");
  g_evolve.add(evolve_cmd, false);
  l_evolve.add(evolve_cmd);
  r_evolve.add(evolve_cmd);
  EvolveOpts vo;
  evolve_cmd->add_option("--delta", vo.deltas, "Delta batch TSV, in order (repeatable)");
  evolve_cmd->add_option("--method", vo.method, "baseline, rs, ss or all")
      ->check(CLI::IsMember({"baseline", "rs", "ss", "all"}));
  evolve_cmd->add_option("--m", vo.m, "Second-stage size");
  evolve_cmd->add_option("--batch-size", vo.batch_size, "Units per base iteration");
  evolve_cmd->add_option("--batch-cap", vo.batch_cap, "Largest adaptive batch within one update");
  evolve_cmd->add_flag("--refresh-base", vo.refresh_base, "SS: re-draw the base stratum at every update");

  auto* fit_cmd = app.add_subcommand("fit-cost", "Fit c1, c2 from observed annotation times");
  std::string observations;
  fit_cmd->add_option("--observations", observations, "CSV: entities,triples,seconds");

  auto* optm_cmd = app.add_subcommand("optimal-m", "Second-stage size minimizing modeled cost");
  g_optm.add(optm_cmd, true);
  l_optm.add(optm_cmd);
  r_optm.add(optm_cmd);
  std::uint32_t m_max = 20;
  optm_cmd->add_option("--m-max", m_max, "Largest m searched");

  auto* sim_cmd = app.add_subcommand("simulate", "Seeded multi-trial experiments");
  g_sim.add(sim_cmd, true);
  l_sim.add(sim_cmd);
  r_sim.add(sim_cmd);
  SimOpts so;
  sim_cmd->add_option("--experiment", so.experiment, "static, sweep or evolving");
  sim_cmd->add_option("--trials", so.trials, "Trials per configuration");
  sim_cmd->add_option("--threads", so.threads, "Worker threads (0 = all cores)");
  sim_cmd->add_option("--designs", so.designs, "static: comma-separated designs");
  sim_cmd->add_option("--m", so.m, "static: TWCS m (0 = optimal)");
  sim_cmd->add_option("--sweep", so.sweep, "sweep: range such as m=1..20");
  sim_cmd->add_option("--sweep-trials", so.sweep_trials, "sweep: simulated trials per m (0 = model only)");
  sim_cmd->add_option("--base-triples", so.base_triples, "evolving: base graph size");
  sim_cmd->add_option("--delta-fraction", so.delta_fractions, "evolving: update sizes relative to the base");
  sim_cmd->add_option("--updates", so.updates, "evolving: repeat the first delta fraction this many times");
  sim_cmd->add_option("--base-error", so.base_error, "evolving: REM error rate of the base");
  sim_cmd->add_option("--update-error", so.update_error, "evolving: REM error rate of updates");
  sim_cmd->add_option("--existing-share", so.existing_share, "evolving: share of update groups on known entities");
  sim_cmd->add_option("--methods", so.methods, "evolving: comma-separated methods");
  sim_cmd->add_option("--evolve-m", so.evolve_m, "evolving: second-stage size");

  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
  g_serve.add(serve_cmd, true);
  std::string name, host = "127.0.0.1";
  int port = 8080;
  long lease_ttl = 15 * 60;
  serve_cmd->add_option("--name", name, "Graph name used in POST /sessions (default: file stem)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port");
  serve_cmd->add_option("--lease-ttl", lease_ttl, "Task lease in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? ok : config;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(common, g_ingest, snap, out);
    if (*labels_cmd) return cmd_gen_labels(common, g_labels, l_labels, labels_out, out);
    if (*eval_cmd) return cmd_evaluate(common, g_eval, l_eval, r_eval, eo, m_opt->count() > 0, out);
    if (*evolve_cmd) return cmd_evolve(common, g_evolve, l_evolve, r_evolve, vo, out);
    if (*fit_cmd) return cmd_fit_cost(common, observations, out);
    if (*optm_cmd) return cmd_optimal_m(common, g_optm, l_optm, r_optm, m_max, out);
    if (*sim_cmd) return cmd_simulate(common, g_sim, l_sim, r_sim, so, out);
    if (*serve_cmd) return cmd_serve(g_serve, name, host, port, lease_ttl, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return failure;
}

}  // namespace kgacc::cli
