#include "pcz/bench.hpp"

#include <chrono>
#include <cstdio>
#include <random>

namespace pcz {

Model random_hclt_model(std::size_t d, std::uint32_t m, std::uint32_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MITable mi;
  mi.num_vars = d;
  mi.bits.assign(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) mi.at(i, j) = mi.at(j, i) = unif(rng);
  HcltSpec spec{chow_liu_tree(mi), m, seed};
  return prepare_model(compile_hclt(spec, std::vector<std::uint32_t>(d, k)), seed);
}

BenchRow bench_model(const Model& model, std::size_t timing_samples, std::uint64_t seed) {
  const Circuit& c = model.circuit;
  const auto counts = count_evaluated_units(model.schedule);
  BenchRow row;
  row.num_vars = c.num_vars();
  row.units = c.num_units();
  row.edges = c.num_edges();
  row.groups = counts.groups;
  row.group_bound = counts.group_bound;
  row.eval_units = counts.total_units;
  row.naive_units = counts.naive_units();
  row.eval_per_dp = static_cast<double>(counts.total_units) / (static_cast<double>(row.num_vars) * row.edges);
  if (timing_samples == 0) return row;

  std::mt19937_64 rng(seed);
  std::vector<std::vector<Symbol>> xs(timing_samples, std::vector<Symbol>(c.num_vars()));
  for (auto& x : xs)
    for (std::size_t v = 0; v < x.size(); ++v) x[v] = static_cast<Symbol>(rng() % c.cardinality(static_cast<std::uint32_t>(v)));

  using clock = std::chrono::steady_clock;
  PrefixEvaluator ev(c, model.schedule, model.p_down);
  std::vector<double> table;
  auto t0 = clock::now();
  for (const auto& x : xs) {
    ev.reset();
    for (auto var : model.order) {
      ev.conditional(table);
      ev.commit(x[var]);
    }
  }
  row.ms_per_sample = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / timing_samples;

  // Naive: one full marginal pass per prefix.
  std::vector<double> scratch(c.num_units());
  t0 = clock::now();
  for (const auto& x : xs) {
    Evidence e = Evidence::all_free(c.num_vars());
    for (auto var : model.order) {
      e.exact(var, x[var]);
      evaluate_marginal(c, e, scratch);
    }
  }
  row.naive_ms_per_sample = std::chrono::duration<double, std::milli>(clock::now() - t0).count() / timing_samples;
  return row;
}

std::string bench_header() {
  return "D\tunits\tedges\tgroups\tgroup_bound\teval_units\tnaive_units\teval_per_D_edges\tms_per_sample\tnaive_ms_per_sample";
}

std::string bench_line(const BenchRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu\t%zu\t%zu\t%zu\t%.1f\t%zu\t%zu\t%.6f\t%.3f\t%.3f", r.num_vars, r.units, r.edges,
                r.groups, r.group_bound, r.eval_units, r.naive_units, r.eval_per_dp, r.ms_per_sample,
                r.naive_ms_per_sample);
  return buf;
}

}  // namespace pcz
