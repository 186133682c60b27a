#include "advgraph/metrics.hpp"

#include "advgraph/errors.hpp"

namespace advgraph {

double acd(std::span<const NodeRecord> records) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : records) {
    if (!r.correct_before) continue;
    sum += r.cd_after - r.cd_before;
    ++count;
  }
  if (count == 0) throw EmptySet("ACD over an empty population");
  return sum / static_cast<double>(count);
}

double asr(std::span<const NodeRecord> records) {
  std::size_t hits = 0, count = 0;
  for (const auto& r : records) {
    if (!r.correct_before) continue;
    ++count;
    if (r.success) ++hits;
  }
  if (count == 0) throw EmptySet("ASR over an empty population");
  return static_cast<double>(hits) / static_cast<double>(count);
}

double adr(double asr_undefended, double asr_defended) {
  if (!(asr_undefended > 0.0))
    throw UndefinedBaseline("ADR needs a baseline attack with non-zero success rate");
  return (asr_undefended - asr_defended) / asr_undefended;
}

double accuracy(const std::vector<int>& predicted, const NodeSplit& split,
                std::span<const Index> subset) {
  if (subset.empty()) throw EmptySet("accuracy over an empty node set");
  std::size_t hits = 0;
  for (Index v : subset)
    if (predicted[static_cast<std::size_t>(v)] == split.labels[static_cast<std::size_t>(v)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(subset.size());
}

double accuracy(const ModelParams& p, const Graph& g, const NodeSplit& split,
                std::span<const Index> subset) {
  if (subset.empty()) throw EmptySet("accuracy over an empty node set");
  return accuracy(predict(p, g).labels, split, subset);
}

std::vector<NodeRecord> slice_by_label(std::span<const NodeRecord> records, int label) {
  std::vector<NodeRecord> out;
  for (const auto& r : records)
    if (r.label == label) out.push_back(r);
  return out;
}

}  // namespace advgraph
