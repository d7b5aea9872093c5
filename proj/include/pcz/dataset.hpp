#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcz/circuit.hpp"

namespace pcz {

// N samples of D categorical variables, row-major.
struct Dataset {
  std::size_t num_samples = 0;
  std::size_t num_vars = 0;
  std::vector<std::uint32_t> cardinalities;
  std::vector<Symbol> values;
  // Per-sample shape as read from an IDX file (e.g. {28, 28}); informational.
  std::vector<std::uint32_t> sample_dims;

  std::span<const Symbol> row(std::size_t n) const { return {values.data() + n * num_vars, num_vars}; }
  std::span<Symbol> row(std::size_t n) { return {values.data() + n * num_vars, num_vars}; }

  // Throws Error(Contract) on a value outside its variable's cardinality.
  void check() const;
  Dataset subset(std::size_t begin, std::size_t end) const;
};

enum class DataFormat { Idx, Raw, Text };

struct IngestSpec {
  DataFormat format = DataFormat::Idx;
  std::string path;
  std::size_t num_vars = 0;                   // raw only: values per sample
  std::optional<std::uint32_t> cardinality;   // default: max value + 1 (at least 2)
  std::optional<std::uint32_t> binarize_threshold;  // value >= threshold -> 1
  std::optional<std::size_t> limit;           // keep the first `limit` samples
};

DataFormat parse_data_format(const std::string& name);

Dataset load_dataset(const IngestSpec& spec);

// IDX: big-endian magic 0x0000080N (unsigned bytes, N dimensions), N
// big-endian u32 sizes, then the payload. The first dimension is the sample
// count, the rest form one sample.
Dataset read_idx(const std::string& path);
std::vector<std::uint8_t> serialize_idx(const Dataset& data, std::span<const std::uint32_t> sample_dims);
Dataset parse_idx(std::span<const std::uint8_t> bytes);
void write_idx(const std::string& path, const Dataset& data, std::span<const std::uint32_t> sample_dims);

// Raw: consecutive unsigned bytes, `num_vars` per sample.
Dataset read_raw(const std::string& path, std::size_t num_vars);
void write_raw(const std::string& path, const Dataset& data);

// Text: one sample per line, values separated by commas, tabs or spaces.
Dataset read_text(const std::string& path);
void write_text(const std::string& path, const Dataset& data);

// Sets every variable's cardinality to max value + 1 (at least 2) or to
// `fixed` when given.
void assign_cardinalities(Dataset& data, std::optional<std::uint32_t> fixed);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace pcz
