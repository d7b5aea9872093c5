// pcz: train probabilistic-circuit models and use them as lossless codecs.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcz/bench.hpp"
#include "pcz/codec.hpp"
#include "pcz/dataset.hpp"
#include "pcz/error.hpp"
#include "pcz/learner.hpp"
#include "pcz/model.hpp"
#include "pcz/parallel.hpp"

namespace {

using namespace pcz;

// Exit codes: 0 ok, 1 unexpected failure, 10 + ErrorKind for library errors.
int exit_code(ErrorKind k) { return 10 + static_cast<int>(k); }

struct IngestOptions {
  std::string path;
  std::string format = "idx";
  std::size_t values_per_sample = 0;
  std::optional<std::uint32_t> cardinality;
  std::optional<std::uint32_t> threshold;
  std::optional<std::size_t> limit;

  void add(CLI::App* cmd, const std::string& flag, const std::string& what) {
    cmd->add_option(flag, path, what)->required();
    cmd->add_option("--format", format, "idx, raw or text")->check(CLI::IsMember({"idx", "raw", "text", "csv"}));
    cmd->add_option("--values-per-sample", values_per_sample, "values per sample (required for raw)");
    cmd->add_option("--cardinality", cardinality, "categories per variable (default: max value + 1)");
    cmd->add_option("--binarize-threshold", threshold, "map value >= threshold to 1, else 0");
    cmd->add_option("--limit", limit, "use only the first N samples");
  }

  Dataset load() const {
    IngestSpec s;
    s.format = parse_data_format(format);
    s.path = path;
    s.num_vars = values_per_sample;
    s.cardinality = cardinality;
    s.binarize_threshold = threshold;
    s.limit = limit;
    return load_dataset(s);
  }
};

// Data fed to an existing model takes the model's cardinalities.
Dataset load_for_model(const IngestOptions& in, const Model& m) {
  IngestOptions copy = in;
  copy.cardinality.reset();
  Dataset d = copy.load();
  if (d.num_vars == m.circuit.num_vars())
    d.cardinalities.assign(m.circuit.cardinalities().begin(), m.circuit.cardinalities().end());
  return d;
}

std::vector<std::uint32_t> parse_dims(const std::string& text) {
  std::vector<std::uint32_t> dims;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto next = text.find_first_of(",x", pos);
    const std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    try {
      dims.push_back(static_cast<std::uint32_t>(std::stoul(part)));
    } catch (const std::exception&) {
      fail(ErrorKind::Contract, "bad dimension list '" + text + "'");
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return dims;
}

void print_stats(const CompressStats& s, const std::string& layout) {
  std::printf("samples\tD\tlayout\ttheoretical_bpd\tcodeword_bpd\tarchive_bpd\tgap\tseconds\n");
  std::printf("%zu\t%zu\t%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.3f\n", s.num_samples, s.num_vars, layout.c_str(),
              s.theoretical_bpd, s.codeword_bpd, s.archive_bpd, s.gap(), s.seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcz: lossless compression with probabilistic circuits"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: PCZ_THREADS or all cores)");

  // train
  auto* train_cmd = app.add_subcommand("train", "learn an HCLT model from data");
  IngestOptions train_in;
  train_in.add(train_cmd, "--data", "training data");
  std::string config_path, model_out, valid_path, log_path;
  std::optional<std::uint32_t> latent;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch, mb_epochs, fb_epochs;
  std::optional<double> eta_start, eta_end;
  std::optional<unsigned> truncate;
  bool no_vtree = false;
  train_cmd->add_option("--config", config_path, "JSON training config");
  train_cmd->add_option("--out", model_out, "model file to write")->required();
  train_cmd->add_option("--valid", valid_path, "validation data (same format)");
  train_cmd->add_option("--log", log_path, "append per-epoch metrics (TSV) to this file");
  train_cmd->add_option("--latent,-M", latent, "latent states per variable");
  train_cmd->add_option("--seed", seed, "random seed");
  train_cmd->add_option("--batch-size", batch);
  train_cmd->add_option("--minibatch-epochs", mb_epochs);
  train_cmd->add_option("--fullbatch-epochs", fb_epochs);
  train_cmd->add_option("--eta-start", eta_start);
  train_cmd->add_option("--eta-end", eta_end);
  train_cmd->add_option("--truncate-bits", truncate, "significant bits kept for mutual information (0: all)");
  train_cmd->add_flag("--no-vtree", no_vtree, "omit the vtree section from the model file");

  // compress
  auto* comp_cmd = app.add_subcommand("compress", "compress data with a model");
  std::string model_path, archive_path, layout = "per-sample";
  unsigned precision = kDefaultPrecision;
  IngestOptions comp_in;
  comp_cmd->add_option("--model", model_path)->required();
  comp_in.add(comp_cmd, "--data", "data to compress");
  comp_cmd->add_option("--out", archive_path, "archive to write")->required();
  comp_cmd->add_option("--layout", layout, "per-sample or stream")->check(CLI::IsMember({"per-sample", "stream"}));
  comp_cmd->add_option("--precision", precision, "coder precision in bits")->check(CLI::Range(1, 24));

  // decompress
  auto* dec_cmd = app.add_subcommand("decompress", "restore data from an archive");
  std::string dec_out, out_format = "idx", dims_text;
  dec_cmd->add_option("--model", model_path)->required();
  dec_cmd->add_option("--archive", archive_path)->required();
  dec_cmd->add_option("--out", dec_out)->required();
  dec_cmd->add_option("--format", out_format, "idx, raw or text")->check(CLI::IsMember({"idx", "raw", "text", "csv"}));
  dec_cmd->add_option("--dims", dims_text, "per-sample IDX dimensions, e.g. 28,28");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "theoretical bits per dimension of data under a model");
  IngestOptions eval_in;
  eval_cmd->add_option("--model", model_path)->required();
  eval_in.add(eval_cmd, "--data", "data to evaluate");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "evaluation counts and timing on random HCLTs");
  std::string bench_dims = "16,64,256,1024";
  std::uint32_t bench_m = 4, bench_k = 2;
  std::size_t bench_samples = 2;
  std::uint64_t bench_seed = 1;
  bench_cmd->add_option("--vars", bench_dims, "comma-separated list of D");
  bench_cmd->add_option("--latent,-M", bench_m);
  bench_cmd->add_option("--cardinality", bench_k);
  bench_cmd->add_option("--samples", bench_samples, "samples timed per D (0: counts only)");
  bench_cmd->add_option("--seed", bench_seed);

  // validate-model
  auto* val_cmd = app.add_subcommand("validate-model", "check a model file and print its structure");
  val_cmd->add_option("--model", model_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads == 0) threads = default_threads();

    if (*train_cmd) {
      HcltConfig cfg = config_path.empty() ? HcltConfig{} : load_config(config_path);
      if (latent) cfg.latent_states = *latent;
      if (seed) cfg.seed = *seed;
      if (batch) cfg.em.batch_size = *batch;
      if (mb_epochs) cfg.em.minibatch_epochs = *mb_epochs;
      if (fb_epochs) cfg.em.fullbatch_epochs = *fb_epochs;
      if (eta_start) cfg.em.eta_start = *eta_start;
      if (eta_end) cfg.em.eta_end = *eta_end;
      if (truncate) cfg.truncate_bits = *truncate;
      if (cfg.latent_states < 2) fail(ErrorKind::Contract, "M must be at least 2");
      if (cfg.em.batch_size == 0) fail(ErrorKind::Contract, "batch size must be positive");

      const Dataset data = train_in.load();
      std::optional<Dataset> valid;
      if (!valid_path.empty()) {
        IngestOptions vin = train_in;
        vin.path = valid_path;
        vin.cardinality = data.cardinalities.empty() ? std::nullopt : std::optional(data.cardinalities[0]);
        vin.limit.reset();
        valid = vin.load();
      }
      std::ofstream log;
      if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
        if (!log) fail(ErrorKind::Io, "cannot open " + log_path);
        log << "phase\tepoch\teta\ttrain_bpd\tvalid_bpd\n";
      }
      auto on_epoch = [&](const EpochLog& e) {
        char line[160];
        std::snprintf(line, sizeof line, "%s\t%zu\t%.4f\t%.6f\t%.6f", e.phase.c_str(), e.epoch, e.eta, e.train_bpd,
                      e.valid_bpd);
        std::cerr << line << '\n';
        if (log) log << line << '\n' << std::flush;
      };
      auto result = train(data, cfg, valid ? &*valid : nullptr, on_epoch, threads);
      Model m = prepare_model(result.circuit, cfg.seed);
      save_model(model_out, m, !no_vtree);
      std::printf("model\tD\tM\tunits\tedges\tparameters\tchecksum\n%s\t%zu\t%u\t%zu\t%zu\t%zu\t%08x\n",
                  model_out.c_str(), m.circuit.num_vars(), cfg.latent_states, m.circuit.num_units(),
                  m.circuit.num_edges(), m.circuit.num_parameters(), m.checksum);
    } else if (*comp_cmd) {
      const Model m = load_model(model_path);
      const Dataset data = load_for_model(comp_in, m);
      CompressOptions opt;
      opt.layout = parse_layout(layout);
      opt.precision = precision;
      opt.threads = threads;
      const auto res = compress(m, data, opt);
      write_file(archive_path, serialize_archive(res.archive));
      print_stats(res.stats, layout);
    } else if (*dec_cmd) {
      const Model m = load_model(model_path);
      const Archive a = parse_archive(read_file(archive_path));
      const Dataset d = decompress(m, a, threads);
      switch (parse_data_format(out_format)) {
        case DataFormat::Idx: write_idx(dec_out, d, parse_dims(dims_text)); break;
        case DataFormat::Raw: write_raw(dec_out, d); break;
        case DataFormat::Text: write_text(dec_out, d); break;
      }
    } else if (*eval_cmd) {
      const Model m = load_model(model_path);
      const Dataset data = load_for_model(eval_in, m);
      data.check();
      std::printf("samples\tD\ttheoretical_bpd\n%zu\t%zu\t%.6f\n", data.num_samples, data.num_vars,
                  eval_bpd(m.circuit, data, threads));
    } else if (*bench_cmd) {
      std::printf("%s\n", bench_header().c_str());
      for (auto d : parse_dims(bench_dims)) {
        const Model m = random_hclt_model(d, bench_m, bench_k, bench_seed);
        std::printf("%s\n", bench_line(bench_model(m, bench_samples, bench_seed)).c_str());
        std::fflush(stdout);
      }
    } else if (*val_cmd) {
      const Model m = load_model(model_path);
      Circuit c = m.circuit;
      const auto rep = validate(c);
      const auto bal = balancedness_report(c);
      const auto counts = count_evaluated_units(m.schedule);
      std::printf("D\tunits\tedges\tparameters\tsmooth\tdecomposable\tstructured\tnormalized\tmax_group\tbalance_ratio"
                  "\tgroups\tgroup_bound\tchecksum\n");
      std::printf("%zu\t%zu\t%zu\t%zu\t%d\t%d\t%d\t%d\t%zu\t%.3f\t%zu\t%.1f\t%08x\n", c.num_vars(), c.num_units(),
                  c.num_edges(), c.num_parameters(), rep.flags.smooth, rep.flags.decomposable, rep.flags.structured,
                  rep.flags.normalized, bal.max_group, bal.ratio, counts.groups, counts.group_bound, m.checksum);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "pcz: %s: %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pcz: %s\n", e.what());
    return 1;
  }
  return 0;
}
