#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcz/circuit.hpp"
#include "pcz/vtree.hpp"

namespace pcz {

// Top-down probability of every unit, in log space: the sum over root-to-unit
// paths of the product of the sum-edge weights along the path.
struct TopDownProbs {
  std::vector<double> log_p;
  double value(UnitId u) const;
};

TopDownProbs top_down_probabilities(const Circuit& circuit);

// Everything evaluated at one step of the prefix-marginal recursion.
struct ScheduleStep {
  std::uint32_t variable = 0;
  std::vector<NodeId> path;    // vtree nodes evaluated, leaf first; back() is the top node
  std::vector<UnitId> eval;    // units conforming to `path`, ascending (bottom-up)
  std::vector<UnitId> inputs;  // input units of `variable`

  // Units of the top node reached from outside `eval` (or the root). The
  // prefix marginal is the mixture of these units weighted by the mass that
  // enters them from outside; `entries` lists those edges.
  struct Entry {
    std::uint32_t head = 0;  // index into heads
    UnitId parent = 0;
    std::uint32_t slot = 0;  // position of the head in the parent's child list
  };
  std::vector<UnitId> heads;
  std::vector<Entry> entries;
};

class EvalSchedule {
 public:
  std::size_t num_vars() const { return order_.size(); }
  std::span<const std::uint32_t> order() const { return order_; }
  const ScheduleStep& step(std::size_t i) const { return steps_[i]; }
  std::size_t num_units() const { return num_units_; }
  std::size_t num_edges() const { return num_edges_; }

 private:
  friend EvalSchedule build_schedule(const Circuit&, const Vtree&, const ConformanceMap&,
                                     std::span<const std::uint32_t>);
  std::vector<std::uint32_t> order_;
  std::vector<ScheduleStep> steps_;
  std::size_t num_units_ = 0;
  std::size_t num_edges_ = 0;
};

// Precomputes the per-step evaluation sets for `order`. The order must keep
// every vtree node's scope contiguous (the inorder order of the ordered vtree
// is the intended one); anything else is a contract error, as is a circuit
// with products that are not binary or not aligned to the vtree.
EvalSchedule build_schedule(const Circuit& circuit, const Vtree& vtree, const ConformanceMap& conformance,
                            std::span<const std::uint32_t> order);

// Incremental prefix-marginal evaluator. Owns the per-unit value cache, so one
// instance serves one sample at a time; the circuit and schedule are shared.
//
//   reset();
//   for each step: conditional(table) (optional), then commit(x[order[i]]).
//
// The same calls in the same order give bit-identical results, which is what
// keeps encoder and decoder in lockstep.
class PrefixEvaluator {
 public:
  PrefixEvaluator(const Circuit& circuit, const EvalSchedule& schedule, const TopDownProbs& p_down);

  void reset();
  std::size_t step() const { return step_; }
  bool done() const { return step_ == schedule_->num_vars(); }

  // p(X_order[step] = v | committed prefix) for every v, written to `out`
  // (resized to K). Throws Error(Numerical) when the prefix has probability 0.
  void conditional(std::vector<double>& out);

  // Fixes the current variable to `value` and returns log p(prefix including it).
  double commit(Symbol value);

 private:
  const Circuit* circuit_;
  const EvalSchedule* schedule_;
  std::vector<std::vector<double>> head_log_weight_;  // per step, aligned with heads
  std::vector<double> value_;                         // log value cache
  std::vector<double> grad_;                          // log derivative scratch
  std::vector<std::uint32_t> stamp_;                  // step+1 for units in the current eval set
  std::vector<double> joint_;
  std::size_t step_ = 0;
};

// F[i] = log p(x_order[0], ..., x_order[i]).
std::vector<double> prefix_marginals(const Circuit& circuit, const EvalSchedule& schedule,
                                     const TopDownProbs& p_down, std::span<const Symbol> x);

// Conditional tables for every step, computed from the true prefix of x.
// Entry i is indexed by value of variable order[i].
std::vector<std::vector<double>> conditional_tables(const Circuit& circuit, const EvalSchedule& schedule,
                                                    const TopDownProbs& p_down, std::span<const Symbol> x);

struct EvalCounts {
  std::vector<std::size_t> units_per_step;
  std::size_t total_units = 0;  // sum over steps of |eval_i|
  std::size_t groups = 0;       // sum over steps of evaluated vtree nodes
  double group_bound = 0.0;     // 3 D log2 D (1 when D = 1)
  std::size_t circuit_units = 0;
  std::size_t circuit_edges = 0;
  // Units a naive evaluator touches for the same F: D full passes.
  std::size_t naive_units() const { return units_per_step.size() * circuit_units; }
};

EvalCounts count_evaluated_units(const EvalSchedule& schedule);

}  // namespace pcz
