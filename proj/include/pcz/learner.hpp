#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcz/circuit.hpp"
#include "pcz/dataset.hpp"

namespace pcz {

// Symmetric D x D mutual information in bits. The diagonal is 0 by convention.
struct MITable {
  std::size_t num_vars = 0;
  std::vector<double> bits;
  double at(std::size_t i, std::size_t j) const { return bits[i * num_vars + j]; }
  double& at(std::size_t i, std::size_t j) { return bits[i * num_vars + j]; }
};

// Values of a variable with cardinality K are shifted right until at most
// `truncate_bits` significant bits remain (0 keeps them all). Every joint
// cell receives `pseudocount` extra counts.
MITable mutual_information(const Dataset& data, unsigned truncate_bits, double pseudocount = 1.0,
                           unsigned threads = 0);

// Mutual information of two columns, the building block of the table above.
double pairwise_mutual_information(std::span<const std::uint32_t> x, std::uint32_t cx,
                                   std::span<const std::uint32_t> y, std::uint32_t cy, double pseudocount);

// Chow-Liu tree rooted at variable 0: parent[0] = -1.
struct CLTree {
  std::vector<std::int32_t> parent;
  std::size_t num_vars() const { return parent.size(); }
  std::vector<std::vector<std::uint32_t>> children() const;  // ascending per node
  double weight(const MITable& mi) const;
};

// Maximum-weight spanning tree (Kruskal). Equal weights are taken in
// increasing (min endpoint, max endpoint) order.
CLTree chow_liu_tree(const MITable& mi);

struct EmConfig {
  std::size_t batch_size = 1024;
  std::size_t minibatch_epochs = 100;
  std::size_t fullbatch_epochs = 20;
  double eta_start = 0.1;  // mini-batch step size, annealed linearly across epochs
  double eta_end = 0.05;
  double leaf_pseudocount = 0.01;
  double sum_pseudocount = 0.01;
};

struct HcltConfig {
  std::uint32_t latent_states = 16;  // M
  unsigned truncate_bits = 3;
  double mi_pseudocount = 1.0;
  std::uint64_t seed = 1;
  EmConfig em;
};

// Reads a JSON training config. Keys: M, batch_size, minibatch_epochs,
// fullbatch_epochs, eta_start, eta_end, leaf_pseudocount, sum_pseudocount,
// mi_pseudocount, truncate_bits, seed. Missing keys keep their defaults.
HcltConfig parse_config(const std::string& json_text);
HcltConfig load_config(const std::string& path);
std::string config_to_json(const HcltConfig& config);

struct HcltSpec {
  CLTree tree;
  std::uint32_t latent_states = 16;
  std::uint64_t seed = 1;
};

// Hidden Chow-Liu tree compiled into a smooth, structured-decomposable PC.
// Every tree node gets M input units for its observed variable; an internal
// node gets M products (its inputs times its children's sums) and M sums over
// them, a tree leaf gets M sums directly over its inputs, and the root keeps a
// single sum. Parameters are drawn from the seed.
Circuit compile_hclt(const HcltSpec& spec, std::span<const std::uint32_t> cardinalities);

// Expected flows of a batch: one entry per sum edge and per input
// probability entry, in the circuit's storage order.
class FlowAccumulator {
 public:
  explicit FlowAccumulator(const Circuit& circuit);
  void reset();
  void merge(const FlowAccumulator& other);

  std::span<const double> edge_flows(UnitId u) const;
  std::span<const double> leaf_counts(UnitId u) const;
  double log_likelihood() const { return log_likelihood_; }
  std::size_t samples() const { return samples_; }

 private:
  friend void accumulate_sample(const Circuit&, std::span<const Symbol>, FlowAccumulator&, std::vector<double>&,
                                std::vector<double>&);
  std::vector<std::size_t> edge_offset_;
  std::vector<std::size_t> leaf_offset_;
  std::vector<double> edge_;
  std::vector<double> leaf_;
  double log_likelihood_ = 0.0;
  std::size_t samples_ = 0;
};

// Adds one sample's flows. `value` and `flow` are scratch of num_units().
void accumulate_sample(const Circuit& circuit, std::span<const Symbol> x, FlowAccumulator& acc,
                       std::vector<double>& value, std::vector<double>& flow);

// Flows of samples `rows` of `data`. Work is split into fixed chunks reduced
// in chunk order, so the result does not depend on the thread count.
// Throws Error(Numerical) naming the sample if one has zero likelihood.
FlowAccumulator em_flows(const Circuit& circuit, const Dataset& data, std::span<const std::size_t> rows,
                         unsigned threads = 0);
FlowAccumulator em_flows(const Circuit& circuit, const Dataset& data, unsigned threads = 0);

// theta <- (1 - eta) theta + eta theta_EM, where theta_EM normalizes flows plus
// pseudocounts. eta = 1 is the full-batch update.
void em_update(Circuit& circuit, const FlowAccumulator& flows, double eta, const EmConfig& config);

double mean_log_likelihood(const Circuit& circuit, const Dataset& data, unsigned threads = 0);
// Mean -log2 p(x) / D.
double bits_per_dim(const Circuit& circuit, const Dataset& data, unsigned threads = 0);

struct EpochLog {
  std::string phase;  // "minibatch" or "fullbatch"
  std::size_t epoch = 0;
  double eta = 0.0;
  double train_bpd = 0.0;
  double valid_bpd = 0.0;  // NaN without a validation set
};

struct TrainResult {
  Circuit circuit;  // products binarized
  CLTree tree;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const Dataset& data, const HcltConfig& config, const Dataset* validation = nullptr,
                  const EpochCallback& on_epoch = {}, unsigned threads = 0);

}  // namespace pcz
