#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcz/circuit.hpp"
#include "pcz/inference.hpp"
#include "pcz/vtree.hpp"

namespace pcz {

// A circuit made ready for coding: products binarized and aligned with the
// ordered vtree, the optimal order, its schedule and top-down probabilities.
struct Model {
  Circuit circuit;
  Vtree vtree;
  ConformanceMap conformance;
  std::vector<std::uint32_t> order;
  EvalSchedule schedule;
  TopDownProbs p_down;
  std::uint64_t seed = 0;
  std::uint32_t checksum = 0;  // CRC-32 of the circuit (without vtree) and the order
};

// validate -> binarize -> extract vtree -> order -> align -> schedule.
// Throws Error(Structural) or Error(Contract) when the circuit is not a
// normalized, smooth, structured-decomposable PC.
Model prepare_model(const Circuit& circuit, std::uint64_t seed = 0);

// PCM1 model file; see docs/formats.md.
std::vector<std::uint8_t> serialize_model(const Model& model, bool with_vtree = true);
Model parse_model(std::span<const std::uint8_t> bytes);

void save_model(const std::string& path, const Model& model, bool with_vtree = true);
Model load_model(const std::string& path);

}  // namespace pcz
