#include "pcz/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "pcz/error.hpp"
#include "pcz/log_math.hpp"

namespace pcz {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Structural: return "structural error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::Numerical: return "numerical error";
    case ErrorKind::Precision: return "precision error";
    case ErrorKind::Unencodable: return "unencodable symbol";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Checksum: return "checksum mismatch";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Decode: return "decoding error";
  }
  return "error";
}

RawUnit RawUnit::input(std::uint32_t var, std::vector<double> probs) {
  RawUnit u;
  u.kind = UnitKind::Input;
  u.variable = var;
  u.probs = std::move(probs);
  return u;
}

RawUnit RawUnit::sum(std::vector<UnitId> children, std::vector<double> params) {
  RawUnit u;
  u.kind = UnitKind::Sum;
  u.children = std::move(children);
  u.params = std::move(params);
  return u;
}

RawUnit RawUnit::product(std::vector<UnitId> children) {
  RawUnit u;
  u.kind = UnitKind::Product;
  u.children = std::move(children);
  return u;
}

std::size_t Circuit::num_parameters() const {
  std::size_t n = probs_.size();
  for (UnitId u = 0; u < num_units(); ++u)
    if (is_sum(u)) n += children(u).size();
  return n;
}

void Circuit::refresh_log_parameters() {
  log_params_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) log_params_[i] = safe_log(params_[i]);
  log_probs_.resize(probs_.size());
  log_below_.resize(probs_.size());
  for (UnitId u = 0; u < num_units(); ++u) {
    if (!is_input(u)) continue;
    double below = 0.0;
    for (std::size_t i = prob_offset_[u]; i < prob_offset_[u + 1]; ++i) {
      log_below_[i] = safe_log(below);
      log_probs_[i] = safe_log(probs_[i]);
      below += probs_[i];
    }
  }
}

void Circuit::swap_product_children(UnitId u) {
  if (!is_product(u) || children(u).size() != 2)
    fail(ErrorKind::Contract, "swap_product_children needs a binary product");
  std::swap(children_[child_offset_[u]], children_[child_offset_[u] + 1]);
}

std::vector<RawUnit> Circuit::to_raw() const {
  std::vector<RawUnit> out;
  out.reserve(num_units());
  for (UnitId u = 0; u < num_units(); ++u) {
    switch (kinds_[u]) {
      case UnitKind::Input:
        out.push_back(RawUnit::input(variables_[u], {probs(u).begin(), probs(u).end()}));
        break;
      case UnitKind::Sum:
        out.push_back(RawUnit::sum({children(u).begin(), children(u).end()},
                                   {params(u).begin(), params(u).end()}));
        break;
      case UnitKind::Product:
        out.push_back(RawUnit::product({children(u).begin(), children(u).end()}));
        break;
    }
  }
  return out;
}

Circuit build_circuit(std::span<const RawUnit> units) {
  std::uint32_t num_vars = 0;
  for (const auto& u : units)
    if (u.kind == UnitKind::Input) num_vars = std::max(num_vars, u.variable + 1);
  std::vector<std::uint32_t> card(num_vars, 0);
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    if (u.kind != UnitKind::Input) continue;
    const auto k = static_cast<std::uint32_t>(u.probs.size());
    if (card[u.variable] != 0 && card[u.variable] != k)
      fail(ErrorKind::Structural, "unit " + std::to_string(i) + ": inconsistent cardinality for variable " +
                                      std::to_string(u.variable));
    card[u.variable] = k;
  }
  return build_circuit(std::move(card), units);
}

Circuit build_circuit(std::vector<std::uint32_t> cardinalities, std::span<const RawUnit> units) {
  auto structural = [](std::size_t id, const std::string& msg) {
    fail(ErrorKind::Structural, "unit " + std::to_string(id) + ": " + msg);
  };
  if (units.empty()) fail(ErrorKind::Structural, "circuit has no units");
  const std::size_t num_vars = cardinalities.size();
  for (std::size_t v = 0; v < num_vars; ++v)
    if (cardinalities[v] < 2) fail(ErrorKind::Structural, "variable " + std::to_string(v) + " has cardinality < 2");

  Circuit c;
  c.cardinalities_ = std::move(cardinalities);
  const std::size_t n = units.size();
  c.kinds_.reserve(n);
  c.variables_.reserve(n);
  c.child_offset_.reserve(n + 1);
  c.prob_offset_.reserve(n + 1);
  c.scope_ids_.reserve(n);

  std::unordered_map<VarSet, std::uint32_t, VarSetHash> intern;
  std::vector<char> has_parent(n, 0);
  std::vector<char> var_seen(num_vars, 0);

  for (std::size_t id = 0; id < n; ++id) {
    const RawUnit& u = units[id];
    VarSet scope(num_vars);
    c.kinds_.push_back(u.kind);
    if (u.kind == UnitKind::Input) {
      if (u.variable >= num_vars) structural(id, "variable index out of range");
      if (u.probs.size() != c.cardinalities_[u.variable]) structural(id, "distribution size != cardinality");
      if (!u.children.empty()) structural(id, "input unit with children");
      c.variables_.push_back(u.variable);
      c.probs_.insert(c.probs_.end(), u.probs.begin(), u.probs.end());
      scope.insert(u.variable);
      var_seen[u.variable] = 1;
    } else {
      if (u.children.empty()) structural(id, "inner unit without children");
      if (u.kind == UnitKind::Sum && u.params.size() != u.children.size())
        structural(id, "sum parameter count != child count");
      c.variables_.push_back(0);
      for (UnitId ch : u.children) {
        if (ch >= n) structural(id, "dangling child id " + std::to_string(ch));
        if (ch >= id) structural(id, "child id " + std::to_string(ch) + " does not precede its parent (cycle or order)");
        scope |= c.scopes_[c.scope_ids_[ch]];
        has_parent[ch] = 1;
      }
      c.children_.insert(c.children_.end(), u.children.begin(), u.children.end());
      if (u.kind == UnitKind::Sum)
        c.params_.insert(c.params_.end(), u.params.begin(), u.params.end());
      else
        c.params_.insert(c.params_.end(), u.children.size(), 1.0);
    }
    c.child_offset_.push_back(c.children_.size());
    c.prob_offset_.push_back(c.probs_.size());
    auto [it, inserted] = intern.try_emplace(scope, static_cast<std::uint32_t>(c.scopes_.size()));
    if (inserted) c.scopes_.push_back(std::move(scope));
    c.scope_ids_.push_back(it->second);
  }

  for (std::size_t id = 0; id + 1 < n; ++id)
    if (!has_parent[id]) structural(id, "unreferenced unit (circuit must have a single root)");
  for (std::size_t v = 0; v < num_vars; ++v)
    if (!var_seen[v]) fail(ErrorKind::Structural, "variable " + std::to_string(v) + " has no input unit");

  c.refresh_log_parameters();
  return c;
}

ValidationReport validate(Circuit& c) {
  ValidationReport r;
  const std::size_t n = c.num_units();

  auto normalized = [](std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) {
      if (!(x >= 0.0) || !std::isfinite(x)) return false;
      s += x;
    }
    return std::abs(s - 1.0) <= kNormalizationTolerance;
  };

  // Product children scope lists, keyed by the product's scope, for the
  // structured-decomposability check.
  std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> split_of_scope;

  for (UnitId u = 0; u < n; ++u) {
    switch (c.kind(u)) {
      case UnitKind::Input:
        if (!normalized(c.probs(u))) r.unnormalized.push_back(u);
        break;
      case UnitKind::Sum: {
        if (!normalized(c.params(u))) r.unnormalized.push_back(u);
        bool smooth = true, alternating = true;
        for (UnitId ch : c.children(u)) {
          if (c.scope_id(ch) != c.scope_id(u)) smooth = false;
          if (c.is_sum(ch)) alternating = false;
        }
        if (!smooth) r.non_smooth.push_back(u);
        if (!alternating) r.non_alternating.push_back(u);
        break;
      }
      case UnitKind::Product: {
        std::size_t total = 0;
        bool alternating = true;
        std::vector<std::uint32_t> split;
        for (UnitId ch : c.children(u)) {
          total += c.scope(ch).count();
          if (c.is_product(ch)) alternating = false;
          split.push_back(c.scope_id(ch));
        }
        if (total != c.scope(u).count()) r.non_decomposable.push_back(u);
        if (!alternating) r.non_alternating.push_back(u);
        auto [it, inserted] = split_of_scope.try_emplace(c.scope_id(u), split);
        if (!inserted && it->second != split) r.non_structured.push_back(u);
        break;
      }
    }
  }

  r.flags.normalized = r.unnormalized.empty();
  r.flags.smooth = r.non_smooth.empty();
  r.flags.decomposable = r.non_decomposable.empty();
  r.flags.structured = r.flags.decomposable && r.non_structured.empty();
  r.flags.alternating = r.non_alternating.empty();
  c.flags_ = r.flags;
  c.validated_ = true;
  return r;
}

Evidence Evidence::all_free(std::size_t num_vars) {
  Evidence e;
  e.states.resize(num_vars);
  return e;
}

Evidence Evidence::complete(std::span<const Symbol> x) {
  Evidence e;
  e.states.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e.states[i] = {Kind::Exact, x[i]};
  return e;
}

Evidence& Evidence::exact(std::uint32_t var, std::uint32_t value) {
  states.at(var) = {Kind::Exact, value};
  return *this;
}

Evidence& Evidence::below(std::uint32_t var, std::uint32_t value) {
  states.at(var) = {Kind::Below, value};
  return *this;
}

Evidence& Evidence::free(std::uint32_t var) {
  states.at(var) = {Kind::Free, 0};
  return *this;
}

namespace {

void require_marginal_ready(const Circuit& c) {
  const auto& f = c.flags();
  if (!c.validated() || !f.smooth || !f.decomposable || !f.normalized)
    fail(ErrorKind::Contract, "marginal query on a circuit that is not validated as smooth, decomposable and normalized");
}

void evaluate_inner(const Circuit& c, UnitId u, std::span<double> val) {
  const auto ch = c.children(u);
  if (c.is_product(u)) {
    double s = 0.0;
    for (UnitId k : ch) s += val[k];
    val[u] = s;
    return;
  }
  const auto lp = c.log_params(u);
  double m = kLogZero;
  for (std::size_t j = 0; j < ch.size(); ++j) m = std::max(m, lp[j] + val[ch[j]]);
  if (m == kLogZero) {
    val[u] = kLogZero;
    return;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < ch.size(); ++j) s += std::exp(lp[j] + val[ch[j]] - m);
  val[u] = m + std::log(s);
}

}  // namespace

double evaluate_marginal(const Circuit& c, const Evidence& e) {
  std::vector<double> scratch(c.num_units());
  return evaluate_marginal(c, e, scratch);
}

double evaluate_marginal(const Circuit& c, const Evidence& e, std::span<double> val) {
  require_marginal_ready(c);
  if (e.states.size() != c.num_vars())
    fail(ErrorKind::Contract, "evidence size does not match the number of variables");
  if (val.size() < c.num_units()) fail(ErrorKind::Contract, "scratch buffer too small");
  for (UnitId u = 0; u < c.num_units(); ++u) {
    if (!c.is_input(u)) {
      evaluate_inner(c, u, val);
      continue;
    }
    const auto& st = e.states[c.variable(u)];
    if (st.kind != Evidence::Kind::Free && st.value >= c.cardinality(c.variable(u)))
      fail(ErrorKind::Contract, "evidence value out of range for variable " + std::to_string(c.variable(u)));
    switch (st.kind) {
      case Evidence::Kind::Free: val[u] = 0.0; break;
      case Evidence::Kind::Exact: val[u] = c.log_probs(u)[st.value]; break;
      case Evidence::Kind::Below: val[u] = c.log_cdf_below(u)[st.value]; break;
    }
  }
  return val[c.root()];
}

double log_likelihood(const Circuit& c, std::span<const Symbol> x, std::span<double> val) {
  require_marginal_ready(c);
  for (UnitId u = 0; u < c.num_units(); ++u) {
    if (c.is_input(u))
      val[u] = c.log_probs(u)[x[c.variable(u)]];
    else
      evaluate_inner(c, u, val);
  }
  return val[c.root()];
}

BalanceReport balancedness_report(const Circuit& c) {
  BalanceReport r;
  r.groups.resize(c.num_scopes());
  for (std::uint32_t s = 0; s < c.num_scopes(); ++s) {
    r.groups[s].scope_id = s;
    r.groups[s].scope_size = c.scope_by_id(s).count();
  }
  for (UnitId u = 0; u < c.num_units(); ++u) {
    auto& g = r.groups[c.scope_id(u)];
    switch (c.kind(u)) {
      case UnitKind::Input: ++g.inputs; break;
      case UnitKind::Sum: ++g.sums; break;
      case UnitKind::Product: ++g.products; break;
    }
  }
  for (const auto& g : r.groups) r.max_group = std::max(r.max_group, g.total());
  const double size = static_cast<double>(std::max(c.num_edges(), c.num_units()));
  r.size_per_var = size / static_cast<double>(c.num_vars());
  r.ratio = static_cast<double>(r.max_group) / r.size_per_var;
  r.unbalanced = r.ratio > kUnbalancedRatio;
  return r;
}

Circuit binarize_products(const Circuit& c) {
  std::vector<RawUnit> out;
  out.reserve(c.num_units() * 2);
  std::vector<UnitId> remap(c.num_units());

  for (UnitId u = 0; u < c.num_units(); ++u) {
    const auto ch = c.children(u);
    switch (c.kind(u)) {
      case UnitKind::Input:
        out.push_back(RawUnit::input(c.variable(u), {c.probs(u).begin(), c.probs(u).end()}));
        break;
      case UnitKind::Sum: {
        std::vector<UnitId> kids;
        for (UnitId k : ch) kids.push_back(remap[k]);
        out.push_back(RawUnit::sum(std::move(kids), {c.params(u).begin(), c.params(u).end()}));
        break;
      }
      case UnitKind::Product: {
        if (ch.size() == 1) {
          remap[u] = remap[ch[0]];
          continue;
        }
        UnitId acc = remap[ch[0]];
        for (std::size_t j = 1; j + 1 < ch.size(); ++j) {
          out.push_back(RawUnit::product({acc, remap[ch[j]]}));
          acc = static_cast<UnitId>(out.size() - 1);
        }
        out.push_back(RawUnit::product({acc, remap[ch.back()]}));
        break;
      }
    }
    remap[u] = static_cast<UnitId>(out.size() - 1);
  }

  std::vector<std::uint32_t> card(c.cardinalities().begin(), c.cardinalities().end());
  Circuit b = build_circuit(std::move(card), out);
  validate(b);
  return b;
}

}  // namespace pcz
