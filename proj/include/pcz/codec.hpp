#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcz/dataset.hpp"
#include "pcz/model.hpp"
#include "pcz/rans.hpp"

namespace pcz {

enum class ArchiveLayout : std::uint16_t {
  // One independent codeword per sample; any sample decodes on its own.
  PerSample = 0,
  // One rANS stream over the whole batch; the state start-up and flush are
  // paid once instead of once per sample.
  Stream = 1,
};

ArchiveLayout parse_layout(const std::string& name);
const char* to_string(ArchiveLayout layout);

struct Archive {
  ArchiveLayout layout = ArchiveLayout::PerSample;
  std::uint32_t model_checksum = 0;
  std::uint64_t num_samples = 0;
  std::uint32_t num_vars = 0;
  std::uint8_t precision = kDefaultPrecision;
  std::vector<std::uint64_t> bit_lengths;  // per sample, or a single entry for Stream
  std::vector<std::uint8_t> payload;       // codewords back to back, bit-packed

  std::uint64_t payload_bits() const;
};

// PCZ1 archive file; see docs/formats.md.
std::vector<std::uint8_t> serialize_archive(const Archive& archive);
Archive parse_archive(std::span<const std::uint8_t> bytes);

struct CompressOptions {
  ArchiveLayout layout = ArchiveLayout::PerSample;
  unsigned precision = kDefaultPrecision;
  unsigned threads = 0;  // 0: PCZ_THREADS or hardware concurrency
};

struct CompressStats {
  std::size_t num_samples = 0;
  std::size_t num_vars = 0;
  double theoretical_bpd = 0.0;  // mean -log2 p(x) / D under the model
  double codeword_bpd = 0.0;     // payload bits / (N D)
  double archive_bpd = 0.0;      // whole archive file, header included
  double gap() const { return codeword_bpd - theoretical_bpd; }
  // Per-sample (codeword bits + log2 p(x)) / D; only for the per-sample layout.
  double mean_sample_gap = 0.0;
  double max_sample_gap = 0.0;
  double seconds = 0.0;
};

struct CompressResult {
  Archive archive;
  CompressStats stats;
};

// Throws Error(Contract) when the data does not fit the model's variables and
// Error(Unencodable) for a symbol the model gives zero probability.
CompressResult compress(const Model& model, const Dataset& data, const CompressOptions& options = {});

// Throws Error(Checksum) when the archive was written with another model and
// Error(Decode) on a corrupt codeword.
Dataset decompress(const Model& model, const Archive& archive, unsigned threads = 0);

// Mean -log2 p(x) / D.
double eval_bpd(const Circuit& circuit, const Dataset& data, unsigned threads = 0);

}  // namespace pcz
