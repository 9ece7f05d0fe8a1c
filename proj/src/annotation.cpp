#include "kgacc/annotation.hpp"

#include <fstream>
#include <string>
#include <thread>
#include <unordered_map>

#include "kgacc/errors.hpp"
#include "tsv.hpp"

namespace kgacc {

std::vector<std::vector<std::uint8_t>> OracleBackend::annotate(const KnowledgeGraph& g,
                                                               std::span<const AnnotationRequest> requests) {
  if (!labels_->covers(g)) throw BackendError("oracle labels do not cover the graph");
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(requests.size());
  for (const auto& r : requests) {
    auto& row = out.emplace_back();
    row.reserve(r.triples.size());
    for (TriplePos p : r.triples) row.push_back((*labels_)[p]);
    requested_ += r.triples.size();
  }
  return out;
}

FileBackend::FileBackend(std::filesystem::path dir, std::chrono::milliseconds timeout,
                         std::chrono::milliseconds poll)
    : dir_(std::move(dir)), timeout_(timeout), poll_(poll) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw BackendError("cannot create " + dir_.string() + ": " + ec.message());
}

std::vector<std::vector<std::uint8_t>> FileBackend::annotate(const KnowledgeGraph& g,
                                                             std::span<const AnnotationRequest> requests) {
  const auto tasks = dir_ / "tasks.tsv";
  const auto labels = dir_ / "labels.tsv";
  {
    std::ofstream out(tasks);
    if (!out) throw BackendError("cannot write " + tasks.string());
    out << "# round=" << round_ << "\n";
    out << "task\tentity_id\tposition\tsubject\tpredicate\tobject\n";
    for (std::size_t i = 0; i < requests.size(); ++i)
      for (TriplePos p : requests[i].triples) {
        const auto& t = g.triple(p);
        out << i << '\t' << requests[i].entity_id << '\t' << p << '\t' << t.subject << '\t' << t.predicate << '\t'
            << t.object << '\n';
      }
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (!std::filesystem::exists(labels)) {
    if (std::chrono::steady_clock::now() >= deadline)
      throw BackendError("timed out waiting for " + labels.string());
    std::this_thread::sleep_for(poll_);
  }
  std::unordered_map<TriplePos, std::uint8_t> got;
  {
    std::ifstream in(labels);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::skippable(line)) continue;
      const auto f = detail::split(detail::trim(line), '\t');
      int label = -1;
      TriplePos pos = 0;
      if (f.size() == 2) {
        if (const auto l = detail::parse_label(f[1])) label = *l;
        try {
          pos = static_cast<TriplePos>(std::stoul(std::string(f[0])));
        } catch (const std::exception&) {
          label = -1;
        }
      }
      if (label < 0) throw BackendError("labels.tsv line " + std::to_string(lineno) + ": expected position<TAB>label");
      got[pos] = static_cast<std::uint8_t>(label);
    }
  }
  std::filesystem::rename(labels, dir_ / ("labels." + std::to_string(round_++) + ".done"));
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& r : requests) {
    auto& row = out.emplace_back();
    for (TriplePos p : r.triples) {
      const auto it = got.find(p);
      if (it == got.end()) throw BackendError("labels.tsv is missing position " + std::to_string(p));
      row.push_back(it->second);
    }
  }
  return out;
}

}  // namespace kgacc
