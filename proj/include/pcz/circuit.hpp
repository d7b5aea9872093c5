#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcz/var_set.hpp"

namespace pcz {

using UnitId = std::uint32_t;
using Symbol = std::uint16_t;

enum class UnitKind : std::uint8_t { Input = 0, Sum = 1, Product = 2 };

// Construction record for a single unit. Children must reference units that
// appear earlier in the list.
struct RawUnit {
  UnitKind kind = UnitKind::Input;
  std::uint32_t variable = 0;     // Input
  std::vector<double> probs;      // Input: categorical distribution over K values
  std::vector<UnitId> children;   // Sum / Product
  std::vector<double> params;     // Sum: one weight per child

  static RawUnit input(std::uint32_t var, std::vector<double> probs);
  static RawUnit sum(std::vector<UnitId> children, std::vector<double> params);
  static RawUnit product(std::vector<UnitId> children);
};

struct CircuitFlags {
  bool normalized = false;
  bool smooth = false;
  bool decomposable = false;
  bool structured = false;
  bool alternating = false;
};

struct ValidationReport {
  CircuitFlags flags;
  std::vector<UnitId> unnormalized;
  std::vector<UnitId> non_smooth;
  std::vector<UnitId> non_decomposable;
  std::vector<UnitId> non_structured;
  std::vector<UnitId> non_alternating;

  // Smooth, decomposable and normalized: enough for marginal queries.
  bool supports_marginals() const {
    return flags.normalized && flags.smooth && flags.decomposable;
  }
};

// Tolerance under which sum weights and input distributions count as normalized.
inline constexpr double kNormalizationTolerance = 1e-9;

// A probabilistic circuit stored as a flat, topologically ordered unit array
// (children before parents, root last). Children and weights are kept in CSR
// form; parameters are linear-space with a log-space mirror for evaluation.
class Circuit {
 public:
  Circuit() = default;

  std::size_t num_vars() const { return cardinalities_.size(); }
  std::span<const std::uint32_t> cardinalities() const { return cardinalities_; }
  std::uint32_t cardinality(std::uint32_t var) const { return cardinalities_[var]; }

  std::size_t num_units() const { return kinds_.size(); }
  // |p|: number of edges in the DAG.
  std::size_t num_edges() const { return children_.size(); }
  // Free parameters are not counted here: every sum weight and every input
  // probability entry counts as one stored parameter.
  std::size_t num_parameters() const;
  UnitId root() const { return static_cast<UnitId>(num_units() - 1); }

  UnitKind kind(UnitId u) const { return kinds_[u]; }
  bool is_input(UnitId u) const { return kinds_[u] == UnitKind::Input; }
  bool is_sum(UnitId u) const { return kinds_[u] == UnitKind::Sum; }
  bool is_product(UnitId u) const { return kinds_[u] == UnitKind::Product; }
  std::uint32_t variable(UnitId u) const { return variables_[u]; }

  std::span<const UnitId> children(UnitId u) const {
    return {children_.data() + child_offset_[u], child_offset_[u + 1] - child_offset_[u]};
  }
  std::span<const double> params(UnitId u) const {
    return {params_.data() + child_offset_[u], child_offset_[u + 1] - child_offset_[u]};
  }
  std::span<const double> log_params(UnitId u) const {
    return {log_params_.data() + child_offset_[u], child_offset_[u + 1] - child_offset_[u]};
  }
  std::span<const double> probs(UnitId u) const {
    return {probs_.data() + prob_offset_[u], prob_offset_[u + 1] - prob_offset_[u]};
  }
  std::span<const double> log_probs(UnitId u) const {
    return {log_probs_.data() + prob_offset_[u], prob_offset_[u + 1] - prob_offset_[u]};
  }
  // Cumulative log mass below each value: log_cdf_below(u)[v] = log P(X < v).
  std::span<const double> log_cdf_below(UnitId u) const {
    return {log_below_.data() + prob_offset_[u], prob_offset_[u + 1] - prob_offset_[u]};
  }

  // Mutable parameter access for learning. Call refresh_log_parameters()
  // after writing, otherwise evaluation keeps using the old values.
  std::span<double> mutable_params(UnitId u) {
    return {params_.data() + child_offset_[u], child_offset_[u + 1] - child_offset_[u]};
  }
  std::span<double> mutable_probs(UnitId u) {
    return {probs_.data() + prob_offset_[u], prob_offset_[u + 1] - prob_offset_[u]};
  }
  void refresh_log_parameters();

  // Reverses the child list of a binary product. Scopes and the distribution
  // are unchanged.
  void swap_product_children(UnitId u);

  std::uint32_t scope_id(UnitId u) const { return scope_ids_[u]; }
  const VarSet& scope(UnitId u) const { return scopes_[scope_ids_[u]]; }
  std::size_t num_scopes() const { return scopes_.size(); }
  const VarSet& scope_by_id(std::uint32_t id) const { return scopes_[id]; }

  const CircuitFlags& flags() const { return flags_; }
  bool validated() const { return validated_; }

  std::vector<RawUnit> to_raw() const;

 private:
  friend Circuit build_circuit(std::vector<std::uint32_t>, std::span<const RawUnit>);
  friend ValidationReport validate(Circuit&);

  std::vector<std::uint32_t> cardinalities_;
  std::vector<UnitKind> kinds_;
  std::vector<std::uint32_t> variables_;
  std::vector<std::size_t> child_offset_{0};
  std::vector<UnitId> children_;
  std::vector<double> params_;
  std::vector<double> log_params_;
  std::vector<std::size_t> prob_offset_{0};
  std::vector<double> probs_;
  std::vector<double> log_probs_;
  std::vector<double> log_below_;
  std::vector<std::uint32_t> scope_ids_;
  std::vector<VarSet> scopes_;
  CircuitFlags flags_;
  bool validated_ = false;
};

// Builds a circuit and computes scopes bottom-up. Throws Error(Structural) on
// forward/dangling child references, empty child lists, malformed parameter
// vectors, variables without an input unit, or more than one root.
Circuit build_circuit(std::vector<std::uint32_t> cardinalities, std::span<const RawUnit> units);
// Same, with cardinalities taken from the input units' distribution sizes.
Circuit build_circuit(std::span<const RawUnit> units);

// Checks normalization, smoothness, decomposability, structured
// decomposability and sum/product alternation, then stores the flags on the
// circuit. Never throws; offending unit ids are listed in the report.
ValidationReport validate(Circuit& circuit);

// Per-variable evidence for marginal queries.
struct Evidence {
  enum class Kind : std::uint8_t { Free, Exact, Below };
  struct State {
    Kind kind = Kind::Free;
    std::uint32_t value = 0;
  };
  std::vector<State> states;

  static Evidence all_free(std::size_t num_vars);
  static Evidence complete(std::span<const Symbol> x);

  Evidence& exact(std::uint32_t var, std::uint32_t value);
  Evidence& below(std::uint32_t var, std::uint32_t value);
  Evidence& free(std::uint32_t var);
};

// Naive bottom-up marginal query in log space; one pass over every unit.
// `scratch` must hold num_units() doubles when provided.
double evaluate_marginal(const Circuit& circuit, const Evidence& evidence);
double evaluate_marginal(const Circuit& circuit, const Evidence& evidence, std::span<double> scratch);

// Log-likelihood of a complete assignment.
double log_likelihood(const Circuit& circuit, std::span<const Symbol> x, std::span<double> scratch);

struct ScopeGroup {
  std::uint32_t scope_id = 0;
  std::size_t scope_size = 0;
  std::size_t inputs = 0;
  std::size_t sums = 0;
  std::size_t products = 0;
  std::size_t total() const { return inputs + sums + products; }
};

struct BalanceReport {
  std::vector<ScopeGroup> groups;  // ordered by scope id
  std::size_t max_group = 0;
  double size_per_var = 0.0;       // circuit size / D
  double ratio = 0.0;              // max_group / size_per_var
  bool unbalanced = false;         // ratio above kUnbalancedRatio
};

// Ratio above which a scope is reported as dominating the circuit.
inline constexpr double kUnbalancedRatio = 4.0;

// Groups units by scope. Circuit size is the edge count, but never less than
// the unit count, so that edge-free circuits (a lone input) report ratio 1.
BalanceReport balancedness_report(const Circuit& circuit);

// Rewrites every product with k > 2 children into a left-nested chain of k-1
// binary products; single-child products are replaced by their child. The
// distribution is unchanged and the edge count at most doubles. The result is
// validated.
Circuit binarize_products(const Circuit& circuit);

}  // namespace pcz
