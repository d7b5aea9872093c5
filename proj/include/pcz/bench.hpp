#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pcz/learner.hpp"
#include "pcz/model.hpp"

namespace pcz {

// HCLT over a Chow-Liu tree of a random symmetric weight table; used to
// measure the schedule on models of arbitrary width.
Model random_hclt_model(std::size_t num_vars, std::uint32_t latent_states, std::uint32_t cardinality,
                        std::uint64_t seed);

struct BenchRow {
  std::size_t num_vars = 0;
  std::size_t units = 0;
  std::size_t edges = 0;
  std::size_t groups = 0;        // evaluated vtree nodes over all steps
  double group_bound = 0.0;      // 3 D log2 D
  std::size_t eval_units = 0;    // evaluated units over all steps
  std::size_t naive_units = 0;   // D full passes
  double eval_per_dp = 0.0;      // eval_units / (D * |p|)
  double ms_per_sample = 0.0;    // conditional tables + commits, one sample
  double naive_ms_per_sample = 0.0;
};

BenchRow bench_model(const Model& model, std::size_t timing_samples, std::uint64_t seed);

std::string bench_header();
std::string bench_line(const BenchRow& row);

}  // namespace pcz
