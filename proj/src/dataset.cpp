#include "pcz/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "pcz/error.hpp"

namespace pcz {

void Dataset::check() const {
  if (values.size() != num_samples * num_vars || cardinalities.size() != num_vars)
    fail(ErrorKind::Contract, "dataset shape is inconsistent");
  for (std::size_t n = 0; n < num_samples; ++n)
    for (std::size_t d = 0; d < num_vars; ++d)
      if (values[n * num_vars + d] >= cardinalities[d])
        fail(ErrorKind::Contract, "sample " + std::to_string(n) + ", variable " + std::to_string(d) +
                                      ": value " + std::to_string(values[n * num_vars + d]) +
                                      " outside cardinality " + std::to_string(cardinalities[d]));
}

Dataset Dataset::subset(std::size_t begin, std::size_t end) const {
  end = std::min(end, num_samples);
  begin = std::min(begin, end);
  Dataset out = *this;
  out.num_samples = end - begin;
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * num_vars),
                    values.begin() + static_cast<std::ptrdiff_t>(end * num_vars));
  return out;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorKind::Io, "cannot read " + path);
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
}

DataFormat parse_data_format(const std::string& name) {
  if (name == "idx") return DataFormat::Idx;
  if (name == "raw") return DataFormat::Raw;
  if (name == "text" || name == "csv") return DataFormat::Text;
  fail(ErrorKind::Format, "unknown data format '" + name + "' (expected idx, raw or text)");
}

void assign_cardinalities(Dataset& data, std::optional<std::uint32_t> fixed) {
  std::uint32_t k = 2;
  if (fixed) {
    k = *fixed;
    if (k < 2) fail(ErrorKind::Contract, "cardinality must be at least 2");
  } else {
    for (Symbol v : data.values) k = std::max<std::uint32_t>(k, v + 1u);
  }
  data.cardinalities.assign(data.num_vars, k);
}

namespace {

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> b) {
  if (b.size() < 4 || b[0] != 0 || b[1] != 0 || b[2] != 0x08)
    fail(ErrorKind::Format, "not an unsigned-byte IDX file");
  const unsigned ndims = b[3];
  if (ndims == 0 || b.size() < 4 + 4ull * ndims) fail(ErrorKind::Format, "truncated IDX header");
  Dataset d;
  d.num_samples = be32(b, 4);
  d.num_vars = 1;
  for (unsigned i = 1; i < ndims; ++i) {
    d.sample_dims.push_back(be32(b, 4 + 4 * i));
    d.num_vars *= d.sample_dims.back();
  }
  const std::size_t header = 4 + 4ull * ndims;
  if (b.size() != header + d.num_samples * d.num_vars)
    fail(ErrorKind::Format, "IDX payload size does not match its header");
  if (d.num_vars == 0) fail(ErrorKind::Format, "IDX sample has zero values");
  d.values.assign(b.begin() + static_cast<std::ptrdiff_t>(header), b.end());
  assign_cardinalities(d, std::nullopt);
  return d;
}

Dataset read_idx(const std::string& path) { return parse_idx(read_file(path)); }

std::vector<std::uint8_t> serialize_idx(const Dataset& d, std::span<const std::uint32_t> dims) {
  std::vector<std::uint32_t> shape(dims.begin(), dims.end());
  if (shape.empty() && d.num_vars != 1) shape.push_back(static_cast<std::uint32_t>(d.num_vars));
  std::size_t prod = 1;
  for (auto s : shape) prod *= s;
  if (prod != d.num_vars) fail(ErrorKind::Contract, "IDX dimensions do not multiply to the sample size");
  if (shape.size() + 1 > 255) fail(ErrorKind::Contract, "too many IDX dimensions");
  std::vector<std::uint8_t> out{0, 0, 0x08, static_cast<std::uint8_t>(shape.size() + 1)};
  put_be32(out, static_cast<std::uint32_t>(d.num_samples));
  for (auto s : shape) put_be32(out, s);
  out.reserve(out.size() + d.values.size());
  for (Symbol v : d.values) {
    if (v > 255) fail(ErrorKind::Contract, "IDX stores bytes; value " + std::to_string(v) + " does not fit");
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

void write_idx(const std::string& path, const Dataset& d, std::span<const std::uint32_t> dims) {
  write_file(path, serialize_idx(d, dims));
}

Dataset read_raw(const std::string& path, std::size_t num_vars) {
  if (num_vars == 0) fail(ErrorKind::Contract, "raw input needs the number of values per sample");
  const auto bytes = read_file(path);
  if (bytes.size() % num_vars != 0)
    fail(ErrorKind::Format, "raw file size is not a multiple of " + std::to_string(num_vars));
  Dataset d;
  d.num_vars = num_vars;
  d.num_samples = bytes.size() / num_vars;
  d.values.assign(bytes.begin(), bytes.end());
  assign_cardinalities(d, std::nullopt);
  return d;
}

void write_raw(const std::string& path, const Dataset& d) {
  std::vector<std::uint8_t> out;
  out.reserve(d.values.size());
  for (Symbol v : d.values) {
    if (v > 255) fail(ErrorKind::Contract, "raw output stores bytes; value does not fit");
    out.push_back(static_cast<std::uint8_t>(v));
  }
  write_file(path, out);
}

Dataset read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      if (*p == ',' || *p == ' ' || *p == '\t' || *p == '\r') {
        ++p;
        continue;
      }
      unsigned v = 0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || v > 0xffff)
        fail(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": expected a small non-negative integer");
      d.values.push_back(static_cast<Symbol>(v));
      ++count;
      p = next;
    }
    if (count == 0) continue;
    if (d.num_samples == 0) d.num_vars = count;
    if (count != d.num_vars)
      fail(ErrorKind::Format, path + ":" + std::to_string(lineno) + ": expected " + std::to_string(d.num_vars) +
                                  " values, found " + std::to_string(count));
    ++d.num_samples;
  }
  assign_cardinalities(d, std::nullopt);
  return d;
}

void write_text(const std::string& path, const Dataset& d) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot create " + path);
  for (std::size_t n = 0; n < d.num_samples; ++n) {
    const auto r = d.row(n);
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
    out << '\n';
  }
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
}

Dataset load_dataset(const IngestSpec& spec) {
  Dataset d;
  switch (spec.format) {
    case DataFormat::Idx: d = read_idx(spec.path); break;
    case DataFormat::Raw: d = read_raw(spec.path, spec.num_vars); break;
    case DataFormat::Text: d = read_text(spec.path); break;
  }
  if (spec.num_vars != 0 && d.num_vars != spec.num_vars)
    fail(ErrorKind::Format, spec.path + ": samples have " + std::to_string(d.num_vars) + " values, expected " +
                                std::to_string(spec.num_vars));
  if (spec.limit && *spec.limit < d.num_samples) d = d.subset(0, *spec.limit);
  if (spec.binarize_threshold) {
    for (Symbol& v : d.values) v = v >= *spec.binarize_threshold ? 1 : 0;
    assign_cardinalities(d, 2);
  } else {
    assign_cardinalities(d, spec.cardinality);
  }
  d.check();
  return d;
}

}  // namespace pcz
