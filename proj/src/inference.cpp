#include "pcz/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcz/error.hpp"
#include "pcz/log_math.hpp"

namespace pcz {

double TopDownProbs::value(UnitId u) const { return std::exp(log_p[u]); }

TopDownProbs top_down_probabilities(const Circuit& c) {
  if (!c.validated()) fail(ErrorKind::Contract, "top-down probabilities need a validated circuit");
  TopDownProbs p;
  p.log_p.assign(c.num_units(), kLogZero);
  p.log_p[c.root()] = 0.0;
  for (UnitId u = c.root() + 1; u-- > 0;) {
    const double mass = p.log_p[u];
    if (mass == kLogZero || c.is_input(u)) continue;
    const auto ch = c.children(u);
    const auto lw = c.log_params(u);
    for (std::size_t j = 0; j < ch.size(); ++j)
      p.log_p[ch[j]] = log_add(p.log_p[ch[j]], c.is_sum(u) ? mass + lw[j] : mass);
  }
  return p;
}

EvalSchedule build_schedule(const Circuit& c, const Vtree& vt, const ConformanceMap& conf,
                            std::span<const std::uint32_t> order) {
  const auto& f = c.flags();
  if (!c.validated() || !f.smooth || !f.structured || !f.normalized)
    fail(ErrorKind::Contract, "schedule needs a validated, normalized, smooth and structured-decomposable circuit");
  if (vt.num_vars() != c.num_vars() || conf.size() != c.num_units())
    fail(ErrorKind::Contract, "vtree or conformance map does not match the circuit");
  if (!order_is_compatible(vt, order))
    fail(ErrorKind::Contract, "variable order is not a permutation keeping every vtree scope contiguous");

  for (UnitId u = 0; u < c.num_units(); ++u) {
    if (conf[u] >= vt.size()) fail(ErrorKind::Contract, "conformance map entry out of range");
    for (UnitId ch : c.children(u)) {
      const bool ok = c.is_sum(u) ? conf[ch] == conf[u] : vt.node(conf[ch]).parent == conf[u];
      if (!ok) fail(ErrorKind::Contract, "unit " + std::to_string(u) + " does not conform to the vtree");
    }
  }

  EvalSchedule s;
  s.order_.assign(order.begin(), order.end());
  s.num_units_ = c.num_units();
  s.num_edges_ = c.num_edges();

  std::vector<std::uint32_t> pos(c.num_vars());
  for (std::uint32_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  std::vector<std::uint32_t> lo(vt.size());
  for (NodeId v = 0; v < vt.size(); ++v) {
    const auto& n = vt.node(v);
    lo[v] = n.is_leaf() ? pos[n.variable] : std::min(lo[n.left], lo[n.right]);
  }

  std::vector<std::vector<UnitId>> group(vt.size());
  for (UnitId u = 0; u < c.num_units(); ++u) group[conf[u]].push_back(u);

  // Parents in CSR form.
  std::vector<std::size_t> parent_offset(c.num_units() + 1, 0);
  for (UnitId u = 0; u < c.num_units(); ++u)
    for (UnitId ch : c.children(u)) ++parent_offset[ch + 1];
  for (std::size_t u = 0; u < c.num_units(); ++u) parent_offset[u + 1] += parent_offset[u];
  std::vector<std::pair<UnitId, std::uint32_t>> parents(parent_offset.back());
  {
    std::vector<std::size_t> fill(parent_offset.begin(), parent_offset.end() - 1);
    for (UnitId u = 0; u < c.num_units(); ++u) {
      const auto ch = c.children(u);
      for (std::uint32_t j = 0; j < ch.size(); ++j) parents[fill[ch[j]]++] = {u, j};
    }
  }

  std::vector<std::uint32_t> in_eval(c.num_units(), 0);
  s.steps_.resize(order.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) {
    ScheduleStep& st = s.steps_[i];
    st.variable = order[i];
    NodeId v = vt.leaf_of(order[i]);
    st.path.push_back(v);
    while (lo[v] != 0) {
      v = vt.node(v).parent;
      st.path.push_back(v);
    }
    for (NodeId w : st.path) st.eval.insert(st.eval.end(), group[w].begin(), group[w].end());
    std::sort(st.eval.begin(), st.eval.end());
    for (UnitId u : group[st.path.front()])
      if (c.is_input(u)) st.inputs.push_back(u);
    for (UnitId u : st.eval) in_eval[u] = i + 1;

    for (UnitId u : st.eval) {
      bool head = u == c.root();
      const auto idx = static_cast<std::uint32_t>(st.heads.size());
      for (std::size_t k = parent_offset[u]; k < parent_offset[u + 1]; ++k) {
        const auto [p, slot] = parents[k];
        if (in_eval[p] == i + 1) continue;
        st.entries.push_back({idx, p, slot});
        head = true;
      }
      if (head) st.heads.push_back(u);
    }
  }
  return s;
}

PrefixEvaluator::PrefixEvaluator(const Circuit& c, const EvalSchedule& s, const TopDownProbs& p_down)
    : circuit_(&c), schedule_(&s) {
  if (s.num_units() != c.num_units() || p_down.log_p.size() != c.num_units())
    fail(ErrorKind::Contract, "schedule or top-down probabilities built for a different circuit");
  head_log_weight_.resize(s.num_vars());
  for (std::size_t i = 0; i < s.num_vars(); ++i) {
    const auto& st = s.step(i);
    auto& w = head_log_weight_[i];
    w.assign(st.heads.size(), kLogZero);
    for (std::size_t h = 0; h < st.heads.size(); ++h)
      if (st.heads[h] == c.root()) w[h] = 0.0;
    for (const auto& e : st.entries) {
      const double edge = c.is_sum(e.parent) ? c.log_params(e.parent)[e.slot] : 0.0;
      w[e.head] = log_add(w[e.head], p_down.log_p[e.parent] + edge);
    }
  }
  value_.resize(c.num_units());
  grad_.resize(c.num_units());
  stamp_.assign(c.num_units(), 0);
  reset();
}

void PrefixEvaluator::reset() {
  // Log 1: with nothing observed every unit of a normalized circuit has value 1.
  std::fill(value_.begin(), value_.end(), 0.0);
  std::fill(stamp_.begin(), stamp_.end(), 0);
  step_ = 0;
}

void PrefixEvaluator::conditional(std::vector<double>& out) {
  if (done()) fail(ErrorKind::Contract, "conditional() called after the last step");
  const Circuit& c = *circuit_;
  const auto& st = schedule_->step(step_);
  const auto mark = static_cast<std::uint32_t>(step_ + 1);
  for (UnitId u : st.eval) {
    stamp_[u] = mark;
    grad_[u] = kLogZero;
  }
  const auto& hw = head_log_weight_[step_];
  for (std::size_t h = 0; h < st.heads.size(); ++h) grad_[st.heads[h]] = hw[h];

  // Backward pass: the prefix mixture is linear in each input unit of the
  // current variable, and grad_ collects the coefficients. Off-path children
  // hold their final (or still-free) values in the cache.
  for (auto it = st.eval.rbegin(); it != st.eval.rend(); ++it) {
    const UnitId u = *it;
    const double g = grad_[u];
    if (g == kLogZero || c.is_input(u)) continue;
    const auto ch = c.children(u);
    if (c.is_sum(u)) {
      const auto lw = c.log_params(u);
      for (std::size_t j = 0; j < ch.size(); ++j) grad_[ch[j]] = log_add(grad_[ch[j]], g + lw[j]);
      continue;
    }
    UnitId on = ch[0];
    double rest = 0.0;
    for (UnitId k : ch) {
      if (stamp_[k] == mark)
        on = k;
      else
        rest += value_[k];
    }
    grad_[on] = log_add(grad_[on], g + rest);
  }

  const std::uint32_t card = c.cardinality(st.variable);
  double top = kLogZero;
  for (UnitId n : st.inputs) top = std::max(top, grad_[n]);
  out.assign(card, 0.0);
  if (top != kLogZero) {
    for (UnitId n : st.inputs) {
      if (grad_[n] == kLogZero) continue;
      const double scale = std::exp(grad_[n] - top);
      const auto p = c.probs(n);
      for (std::uint32_t v = 0; v < card; ++v) out[v] += scale * p[v];
    }
  }
  double total = 0.0;
  for (double x : out) total += x;
  if (!(total > 0.0) || !std::isfinite(total))
    fail(ErrorKind::Numerical, "step " + std::to_string(step_) + ": prefix has zero or non-finite probability");
  for (double& x : out) x /= total;
}

double PrefixEvaluator::commit(Symbol value) {
  if (done()) fail(ErrorKind::Contract, "commit() called after the last step");
  const Circuit& c = *circuit_;
  const auto& st = schedule_->step(step_);
  if (value >= c.cardinality(st.variable))
    fail(ErrorKind::Contract, "value out of range for variable " + std::to_string(st.variable));
  const auto mark = static_cast<std::uint32_t>(step_ + 1);
  for (UnitId u : st.eval) stamp_[u] = mark;

  for (UnitId u : st.eval) {
    if (c.is_input(u)) {
      value_[u] = c.log_probs(u)[value];
      continue;
    }
    const auto ch = c.children(u);
    if (c.is_product(u)) {
      double s = 0.0;
      for (UnitId k : ch) s += value_[k];
      value_[u] = s;
      continue;
    }
    const auto lw = c.log_params(u);
    double m = kLogZero;
    for (std::size_t j = 0; j < ch.size(); ++j) m = std::max(m, lw[j] + value_[ch[j]]);
    if (m == kLogZero) {
      value_[u] = kLogZero;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < ch.size(); ++j) s += std::exp(lw[j] + value_[ch[j]] - m);
    value_[u] = m + std::log(s);
  }

  const auto& hw = head_log_weight_[step_];
  double f = kLogZero;
  for (std::size_t h = 0; h < st.heads.size(); ++h) f = log_add(f, hw[h] + value_[st.heads[h]]);
  if (std::isnan(f) || (f > 0.0 && std::isinf(f)))
    fail(ErrorKind::Numerical, "step " + std::to_string(step_) + ": non-finite prefix marginal");
  ++step_;
  return f;
}

std::vector<double> prefix_marginals(const Circuit& c, const EvalSchedule& s, const TopDownProbs& p_down,
                                     std::span<const Symbol> x) {
  if (x.size() != c.num_vars()) fail(ErrorKind::Contract, "assignment length does not match the circuit");
  PrefixEvaluator ev(c, s, p_down);
  std::vector<double> f(s.num_vars());
  for (std::size_t i = 0; i < s.num_vars(); ++i) f[i] = ev.commit(x[s.order()[i]]);
  return f;
}

std::vector<std::vector<double>> conditional_tables(const Circuit& c, const EvalSchedule& s,
                                                    const TopDownProbs& p_down, std::span<const Symbol> x) {
  if (x.size() != c.num_vars()) fail(ErrorKind::Contract, "assignment length does not match the circuit");
  PrefixEvaluator ev(c, s, p_down);
  std::vector<std::vector<double>> tables(s.num_vars());
  for (std::size_t i = 0; i < s.num_vars(); ++i) {
    ev.conditional(tables[i]);
    ev.commit(x[s.order()[i]]);
  }
  return tables;
}

EvalCounts count_evaluated_units(const EvalSchedule& s) {
  EvalCounts r;
  r.circuit_units = s.num_units();
  r.circuit_edges = s.num_edges();
  for (std::size_t i = 0; i < s.num_vars(); ++i) {
    const auto& st = s.step(i);
    r.units_per_step.push_back(st.eval.size());
    r.total_units += st.eval.size();
    r.groups += st.path.size();
  }
  const double d = static_cast<double>(s.num_vars());
  r.group_bound = s.num_vars() <= 1 ? 1.0 : 3.0 * d * std::log2(d);
  return r;
}

}  // namespace pcz
