#pragma once

// Annotation backends: where labels for requested triples come from.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgacc/kg_store.hpp"
#include "kgacc/labelgen.hpp"

namespace kgacc {

// One entity-grouped task: the triples of one cluster that still need labels.
struct AnnotationRequest {
  ClusterId cluster = 0;
  std::string entity_id;
  std::vector<TriplePos> triples;
};

class AnnotationBackend {
 public:
  virtual ~AnnotationBackend() = default;
  virtual std::string_view kind() const noexcept = 0;
  // Exactly one label per requested triple, aligned with the requests.
  // Failures throw BackendError.
  virtual std::vector<std::vector<std::uint8_t>> annotate(const KnowledgeGraph& g,
                                                          std::span<const AnnotationRequest> requests) = 0;
};

// Answers from a ground-truth label store.
class OracleBackend final : public AnnotationBackend {
 public:
  explicit OracleBackend(const LabelSource& labels) : labels_(&labels) {}

  std::string_view kind() const noexcept override { return "oracle"; }
  std::vector<std::vector<std::uint8_t>> annotate(const KnowledgeGraph& g,
                                                  std::span<const AnnotationRequest> requests) override;

  std::size_t requested_triples() const noexcept { return requested_; }

 private:
  const LabelSource* labels_;
  std::size_t requested_ = 0;
};

// File round trip: writes <dir>/tasks.tsv and waits for <dir>/labels.tsv
// ("position<TAB>label" rows, '#' comments allowed). The labels file is
// renamed to labels.<n>.done after it is consumed.
class FileBackend final : public AnnotationBackend {
 public:
  FileBackend(std::filesystem::path dir, std::chrono::milliseconds timeout,
              std::chrono::milliseconds poll = std::chrono::milliseconds(200));

  std::string_view kind() const noexcept override { return "file"; }
  std::vector<std::vector<std::uint8_t>> annotate(const KnowledgeGraph& g,
                                                  std::span<const AnnotationRequest> requests) override;

 private:
  std::filesystem::path dir_;
  std::chrono::milliseconds timeout_;
  std::chrono::milliseconds poll_;
  std::size_t round_ = 0;
};

}  // namespace kgacc
