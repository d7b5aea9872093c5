#include "pcz/learner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pcz/error.hpp"
#include "pcz/log_math.hpp"
#include "pcz/parallel.hpp"

namespace pcz {

double pairwise_mutual_information(std::span<const std::uint32_t> x, std::uint32_t cx,
                                   std::span<const std::uint32_t> y, std::uint32_t cy, double pseudocount) {
  std::vector<double> joint(static_cast<std::size_t>(cx) * cy, pseudocount);
  for (std::size_t n = 0; n < x.size(); ++n) joint[x[n] * cy + y[n]] += 1.0;
  const double total = static_cast<double>(x.size()) + pseudocount * cx * cy;
  if (total <= 0.0) return 0.0;
  std::vector<double> px(cx, 0.0), py(cy, 0.0);
  for (std::uint32_t a = 0; a < cx; ++a)
    for (std::uint32_t b = 0; b < cy; ++b) {
      px[a] += joint[a * cy + b] / total;
      py[b] += joint[a * cy + b] / total;
    }
  double mi = 0.0;
  for (std::uint32_t a = 0; a < cx; ++a)
    for (std::uint32_t b = 0; b < cy; ++b) {
      const double p = joint[a * cy + b] / total;
      if (p > 0.0) mi += p * std::log2(p / (px[a] * py[b]));
    }
  return std::max(0.0, mi);
}

MITable mutual_information(const Dataset& data, unsigned truncate_bits, double pseudocount, unsigned threads) {
  if (data.num_samples == 0) fail(ErrorKind::Contract, "mutual information needs at least one sample");
  const std::size_t d = data.num_vars;
  std::vector<std::vector<std::uint32_t>> cols(d, std::vector<std::uint32_t>(data.num_samples));
  std::vector<std::uint32_t> card(d);
  for (std::size_t v = 0; v < d; ++v) {
    const std::uint32_t k = data.cardinalities[v];
    const auto width = static_cast<unsigned>(std::bit_width(k - 1));
    const unsigned shift = truncate_bits > 0 && width > truncate_bits ? width - truncate_bits : 0;
    card[v] = ((k - 1) >> shift) + 1;
    for (std::size_t n = 0; n < data.num_samples; ++n) cols[v][n] = data.values[n * d + v] >> shift;
  }
  MITable mi;
  mi.num_vars = d;
  mi.bits.assign(d * d, 0.0);
  parallel_for(d, threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < d; ++j)
      mi.at(i, j) = pairwise_mutual_information(cols[i], card[i], cols[j], card[j], pseudocount);
  });
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) mi.at(j, i) = mi.at(i, j);
  return mi;
}

std::vector<std::vector<std::uint32_t>> CLTree::children() const {
  std::vector<std::vector<std::uint32_t>> ch(parent.size());
  for (std::uint32_t v = 0; v < parent.size(); ++v)
    if (parent[v] >= 0) ch[static_cast<std::size_t>(parent[v])].push_back(v);
  return ch;
}

double CLTree::weight(const MITable& mi) const {
  double w = 0.0;
  for (std::size_t v = 0; v < parent.size(); ++v)
    if (parent[v] >= 0) w += mi.at(v, static_cast<std::size_t>(parent[v]));
  return w;
}

CLTree chow_liu_tree(const MITable& mi) {
  const std::size_t d = mi.num_vars;
  if (d == 0) fail(ErrorKind::Contract, "Chow-Liu tree needs at least one variable");
  struct Edge {
    double w;
    std::uint32_t a, b;
  };
  std::vector<Edge> edges;
  edges.reserve(d * (d - 1) / 2);
  for (std::uint32_t a = 0; a < d; ++a)
    for (std::uint32_t b = a + 1; b < d; ++b) edges.push_back({mi.at(a, b), a, b});
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) { return x.w > y.w; });

  std::vector<std::uint32_t> uf(d);
  std::iota(uf.begin(), uf.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (uf[v] != v) v = uf[v] = uf[uf[v]];
    return v;
  };
  std::vector<std::vector<std::uint32_t>> adj(d);
  std::size_t taken = 0;
  for (const auto& e : edges) {
    if (taken + 1 == d) break;
    const auto ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    uf[ra] = rb;
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
    ++taken;
  }

  CLTree t;
  t.parent.assign(d, -2);
  t.parent[0] = -1;
  std::vector<std::uint32_t> queue{0};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto v = queue[q];
    for (auto w : adj[v])
      if (t.parent[w] == -2) {
        t.parent[w] = static_cast<std::int32_t>(v);
        queue.push_back(w);
      }
  }
  return t;
}

namespace {

const char* const kConfigKeys[] = {"M",        "batch_size",       "minibatch_epochs", "fullbatch_epochs",
                                   "eta_start", "eta_end",         "leaf_pseudocount", "sum_pseudocount",
                                   "mi_pseudocount", "truncate_bits", "seed"};

}  // namespace

HcltConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Format, "config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) == std::end(kConfigKeys))
      fail(ErrorKind::Format, "unknown config key '" + key + "'");
  HcltConfig c;
  try {
    c.latent_states = j.value("M", c.latent_states);
    c.em.batch_size = j.value("batch_size", c.em.batch_size);
    c.em.minibatch_epochs = j.value("minibatch_epochs", c.em.minibatch_epochs);
    c.em.fullbatch_epochs = j.value("fullbatch_epochs", c.em.fullbatch_epochs);
    c.em.eta_start = j.value("eta_start", c.em.eta_start);
    c.em.eta_end = j.value("eta_end", c.em.eta_end);
    c.em.leaf_pseudocount = j.value("leaf_pseudocount", c.em.leaf_pseudocount);
    c.em.sum_pseudocount = j.value("sum_pseudocount", c.em.sum_pseudocount);
    c.mi_pseudocount = j.value("mi_pseudocount", c.mi_pseudocount);
    c.truncate_bits = j.value("truncate_bits", c.truncate_bits);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("bad config value: ") + e.what());
  }
  if (c.latent_states < 2) fail(ErrorKind::Format, "M must be at least 2");
  if (c.em.batch_size == 0) fail(ErrorKind::Format, "batch_size must be positive");
  return c;
}

HcltConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const HcltConfig& c) {
  nlohmann::ordered_json j;
  j["M"] = c.latent_states;
  j["batch_size"] = c.em.batch_size;
  j["minibatch_epochs"] = c.em.minibatch_epochs;
  j["fullbatch_epochs"] = c.em.fullbatch_epochs;
  j["eta_start"] = c.em.eta_start;
  j["eta_end"] = c.em.eta_end;
  j["leaf_pseudocount"] = c.em.leaf_pseudocount;
  j["sum_pseudocount"] = c.em.sum_pseudocount;
  j["mi_pseudocount"] = c.mi_pseudocount;
  j["truncate_bits"] = c.truncate_bits;
  j["seed"] = c.seed;
  return j.dump(2);
}

Circuit compile_hclt(const HcltSpec& spec, std::span<const std::uint32_t> card) {
  const std::uint32_t m = spec.latent_states;
  const std::size_t d = spec.tree.num_vars();
  if (m < 2) fail(ErrorKind::Contract, "HCLT needs at least 2 latent states");
  if (d == 0 || card.size() != d) fail(ErrorKind::Contract, "tree and cardinalities disagree");
  if (spec.tree.parent[0] != -1) fail(ErrorKind::Contract, "tree must be rooted at variable 0");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::gamma_distribution<double> gamma(1.0);
  auto dirichlet = [&](std::size_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += x = gamma(rng) + 1e-3;
    for (auto& x : w) x /= s;
    return w;
  };
  auto jittered_uniform = [&](std::size_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += x = 1.0 + 0.5 * unif(rng);
    for (auto& x : w) x /= s;
    return w;
  };

  const auto children = spec.tree.children();
  std::vector<std::vector<UnitId>> sums_of(d);
  std::vector<RawUnit> units;

  // Iterative postorder over the tree.
  std::vector<std::pair<std::uint32_t, bool>> stack{{0, false}};
  std::size_t visited = 0;
  while (!stack.empty()) {
    auto [v, expanded] = stack.back();
    stack.pop_back();
    if (!expanded) {
      stack.push_back({v, true});
      for (auto it = children[v].rbegin(); it != children[v].rend(); ++it) stack.push_back({*it, false});
      continue;
    }
    ++visited;
    std::vector<UnitId> inputs;
    for (std::uint32_t k = 0; k < m; ++k) {
      units.push_back(RawUnit::input(v, jittered_uniform(card[v])));
      inputs.push_back(static_cast<UnitId>(units.size() - 1));
    }
    std::vector<UnitId> mixed = inputs;
    if (!children[v].empty()) {
      mixed.clear();
      for (std::uint32_t k = 0; k < m; ++k) {
        std::vector<UnitId> factors{inputs[k]};
        for (auto c : children[v]) factors.push_back(sums_of[c][k]);
        units.push_back(RawUnit::product(std::move(factors)));
        mixed.push_back(static_cast<UnitId>(units.size() - 1));
      }
    }
    const std::uint32_t num_sums = v == 0 ? 1 : m;
    for (std::uint32_t k = 0; k < num_sums; ++k) {
      units.push_back(RawUnit::sum(mixed, dirichlet(m)));
      sums_of[v].push_back(static_cast<UnitId>(units.size() - 1));
    }
  }
  if (visited != d) fail(ErrorKind::Contract, "parent array is not a tree rooted at variable 0");

  Circuit c = build_circuit(std::vector<std::uint32_t>(card.begin(), card.end()), units);
  validate(c);
  return c;
}

FlowAccumulator::FlowAccumulator(const Circuit& c) {
  edge_offset_.resize(c.num_units() + 1, 0);
  leaf_offset_.resize(c.num_units() + 1, 0);
  for (UnitId u = 0; u < c.num_units(); ++u) {
    edge_offset_[u + 1] = edge_offset_[u] + c.children(u).size();
    leaf_offset_[u + 1] = leaf_offset_[u] + c.probs(u).size();
  }
  edge_.assign(edge_offset_.back(), 0.0);
  leaf_.assign(leaf_offset_.back(), 0.0);
}

void FlowAccumulator::reset() {
  std::fill(edge_.begin(), edge_.end(), 0.0);
  std::fill(leaf_.begin(), leaf_.end(), 0.0);
  log_likelihood_ = 0.0;
  samples_ = 0;
}

void FlowAccumulator::merge(const FlowAccumulator& o) {
  if (o.edge_.size() != edge_.size() || o.leaf_.size() != leaf_.size())
    fail(ErrorKind::Contract, "merging flows of different circuits");
  for (std::size_t i = 0; i < edge_.size(); ++i) edge_[i] += o.edge_[i];
  for (std::size_t i = 0; i < leaf_.size(); ++i) leaf_[i] += o.leaf_[i];
  log_likelihood_ += o.log_likelihood_;
  samples_ += o.samples_;
}

std::span<const double> FlowAccumulator::edge_flows(UnitId u) const {
  return {edge_.data() + edge_offset_[u], edge_offset_[u + 1] - edge_offset_[u]};
}

std::span<const double> FlowAccumulator::leaf_counts(UnitId u) const {
  return {leaf_.data() + leaf_offset_[u], leaf_offset_[u + 1] - leaf_offset_[u]};
}

void accumulate_sample(const Circuit& c, std::span<const Symbol> x, FlowAccumulator& acc, std::vector<double>& value,
                       std::vector<double>& flow) {
  value.resize(c.num_units());
  const double ll = log_likelihood(c, x, value);
  if (!std::isfinite(ll)) fail(ErrorKind::Numerical, "sample has zero or non-finite likelihood");
  flow.assign(c.num_units(), 0.0);
  flow[c.root()] = 1.0;
  for (UnitId u = c.root() + 1; u-- > 0;) {
    const double f = flow[u];
    if (f == 0.0) continue;
    if (c.is_input(u)) {
      acc.leaf_[acc.leaf_offset_[u] + x[c.variable(u)]] += f;
      continue;
    }
    const auto ch = c.children(u);
    if (c.is_product(u)) {
      for (UnitId k : ch) flow[k] += f;
      continue;
    }
    const auto lw = c.log_params(u);
    const std::size_t off = acc.edge_offset_[u];
    for (std::size_t j = 0; j < ch.size(); ++j) {
      const double e = f * std::exp(lw[j] + value[ch[j]] - value[u]);
      acc.edge_[off + j] += e;
      flow[ch[j]] += e;
    }
  }
  acc.log_likelihood_ += ll;
  ++acc.samples_;
}

namespace {

constexpr std::size_t kChunk = 256;

}  // namespace

FlowAccumulator em_flows(const Circuit& c, const Dataset& data, std::span<const std::size_t> rows, unsigned threads) {
  if (data.num_vars != c.num_vars()) fail(ErrorKind::Contract, "dataset and circuit disagree on D");
  if (threads == 0) threads = default_threads();
  FlowAccumulator total(c);
  const std::size_t chunks = (rows.size() + kChunk - 1) / kChunk;
  const std::size_t wave = std::max<std::size_t>(1, std::min<std::size_t>(threads, chunks));
  std::vector<FlowAccumulator> partial(wave, FlowAccumulator(c));
  for (std::size_t first = 0; first < chunks; first += wave) {
    const std::size_t count = std::min(wave, chunks - first);
    parallel_for(count, threads, [&](std::size_t w) {
      auto& acc = partial[w];
      acc.reset();
      std::vector<double> value, flow;
      const std::size_t begin = (first + w) * kChunk;
      const std::size_t end = std::min(rows.size(), begin + kChunk);
      for (std::size_t r = begin; r < end; ++r) {
        try {
          accumulate_sample(c, data.row(rows[r]), acc, value, flow);
        } catch (const Error& e) {
          fail(e.kind(), "sample " + std::to_string(rows[r]) + ": " + e.what());
        }
      }
    });
    for (std::size_t w = 0; w < count; ++w) total.merge(partial[w]);
  }
  return total;
}

FlowAccumulator em_flows(const Circuit& c, const Dataset& data, unsigned threads) {
  std::vector<std::size_t> rows(data.num_samples);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return em_flows(c, data, rows, threads);
}

void em_update(Circuit& c, const FlowAccumulator& flows, double eta, const EmConfig& config) {
  auto blend = [eta](std::span<double> theta, std::span<const double> counts, double alpha) {
    double denom = 0.0;
    for (double n : counts) denom += n + alpha;
    if (!(denom > 0.0)) return;
    double s = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
      theta[j] = (1.0 - eta) * theta[j] + eta * (counts[j] + alpha) / denom;
      s += theta[j];
    }
    for (double& t : theta) t /= s;
  };
  for (UnitId u = 0; u < c.num_units(); ++u) {
    if (c.is_sum(u))
      blend(c.mutable_params(u), flows.edge_flows(u), config.sum_pseudocount);
    else if (c.is_input(u))
      blend(c.mutable_probs(u), flows.leaf_counts(u), config.leaf_pseudocount);
  }
  c.refresh_log_parameters();
}

double mean_log_likelihood(const Circuit& c, const Dataset& data, unsigned threads) {
  if (data.num_samples == 0) return 0.0;
  if (data.num_vars != c.num_vars()) fail(ErrorKind::Contract, "dataset and circuit disagree on D");
  const std::size_t chunks = (data.num_samples + kChunk - 1) / kChunk;
  std::vector<double> part(chunks, 0.0);
  parallel_for(chunks, threads, [&](std::size_t k) {
    std::vector<double> value(c.num_units());
    const std::size_t end = std::min(data.num_samples, (k + 1) * kChunk);
    for (std::size_t n = k * kChunk; n < end; ++n) part[k] += log_likelihood(c, data.row(n), value);
  });
  double total = 0.0;
  for (double p : part) total += p;
  return total / static_cast<double>(data.num_samples);
}

double bits_per_dim(const Circuit& c, const Dataset& data, unsigned threads) {
  return -mean_log_likelihood(c, data, threads) / (static_cast<double>(c.num_vars()) * std::log(2.0));
}

TrainResult train(const Dataset& data, const HcltConfig& config, const Dataset* validation,
                  const EpochCallback& on_epoch, unsigned threads) {
  data.check();
  if (data.num_samples == 0) fail(ErrorKind::Contract, "training needs at least one sample");
  if (validation && validation->num_vars != data.num_vars)
    fail(ErrorKind::Contract, "validation set has a different number of variables");

  TrainResult result;
  const MITable mi = mutual_information(data, config.truncate_bits, config.mi_pseudocount, threads);
  result.tree = chow_liu_tree(mi);
  HcltSpec spec{result.tree, config.latent_states, config.seed};
  result.circuit = binarize_products(compile_hclt(spec, data.cardinalities));
  Circuit& c = result.circuit;

  auto record = [&](const char* phase, std::size_t epoch, double eta) {
    EpochLog e;
    e.phase = phase;
    e.epoch = epoch;
    e.eta = eta;
    e.train_bpd = bits_per_dim(c, data, threads);
    e.valid_bpd = validation ? bits_per_dim(c, *validation, threads) : std::numeric_limits<double>::quiet_NaN();
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  };

  const auto& em = config.em;
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> rows(data.num_samples);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t epoch = 0; epoch < em.minibatch_epochs; ++epoch) {
    const double t = em.minibatch_epochs > 1 ? static_cast<double>(epoch) / (em.minibatch_epochs - 1) : 0.0;
    const double eta = em.eta_start + (em.eta_end - em.eta_start) * t;
    for (std::size_t i = rows.size(); i > 1; --i) std::swap(rows[i - 1], rows[rng() % i]);
    for (std::size_t b = 0; b < rows.size(); b += em.batch_size) {
      const std::span<const std::size_t> batch(rows.data() + b, std::min(em.batch_size, rows.size() - b));
      em_update(c, em_flows(c, data, batch, threads), eta, em);
    }
    record("minibatch", epoch, eta);
  }
  for (std::size_t epoch = 0; epoch < em.fullbatch_epochs; ++epoch) {
    em_update(c, em_flows(c, data, threads), 1.0, em);
    record("fullbatch", epoch, 1.0);
  }
  return result;
}

}  // namespace pcz
