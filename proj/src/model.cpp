#include "pcz/model.hpp"

#include <zlib.h>

#include "pcz/byte_io.hpp"
#include "pcz/dataset.hpp"
#include "pcz/error.hpp"

namespace pcz {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, n);
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

constexpr std::uint16_t kModelVersion = 1;
constexpr std::uint16_t kFlagVtree = 1;

void finish_model(Model& m) {
  m.order = optimal_order(m.vtree);
  m.schedule = build_schedule(m.circuit, m.vtree, m.conformance, m.order);
  m.p_down = top_down_probabilities(m.circuit);
  // Identifies what the coder depends on: the circuit and the variable order.
  // The vtree section is left out so files with and without it agree.
  ByteWriter w;
  auto body = serialize_model(m, false);
  body.resize(body.size() - 4);
  w.bytes(body);
  for (auto v : m.order) w.u32(v);
  m.checksum = crc32(w.data());
}

}  // namespace

Model prepare_model(const Circuit& circuit, std::uint64_t seed) {
  Circuit c = circuit;
  const auto report = validate(c);
  if (!report.flags.normalized) fail(ErrorKind::Structural, "circuit parameters are not normalized");
  if (!report.flags.smooth) fail(ErrorKind::Structural, "circuit is not smooth");
  if (!report.flags.structured) fail(ErrorKind::Structural, "circuit is not structured-decomposable");
  if (c.scope(c.root()).count() != c.num_vars()) fail(ErrorKind::Structural, "root scope misses variables");

  Model m;
  m.seed = seed;
  m.circuit = binarize_products(c);
  auto ex = extract_vtree(m.circuit);
  m.vtree = order_vtree(ex.vtree);
  m.conformance = std::move(ex.conformance);
  align_products(m.circuit, m.vtree, m.conformance);
  validate(m.circuit);
  finish_model(m);
  return m;
}

std::vector<std::uint8_t> serialize_model(const Model& m, bool with_vtree) {
  const Circuit& c = m.circuit;
  ByteWriter w;
  w.tag("PCM1");
  w.u16(kModelVersion);
  w.u16(with_vtree ? kFlagVtree : 0);
  w.u32(static_cast<std::uint32_t>(c.num_vars()));
  for (auto k : c.cardinalities()) w.u32(k);
  w.u64(c.num_units());
  w.u64(c.num_edges());
  w.u64(m.seed);
  for (UnitId u = 0; u < c.num_units(); ++u) {
    w.u8(static_cast<std::uint8_t>(c.kind(u)));
    if (c.is_input(u)) {
      w.u32(c.variable(u));
      for (double p : c.probs(u)) w.f64(p);
      continue;
    }
    w.u32(static_cast<std::uint32_t>(c.children(u).size()));
    for (UnitId ch : c.children(u)) w.u32(ch);
    if (c.is_sum(u))
      for (double p : c.params(u)) w.f64(p);
  }
  if (with_vtree) {
    w.u32(static_cast<std::uint32_t>(m.vtree.size()));
    for (NodeId v = 0; v < m.vtree.size(); ++v) {
      const auto& n = m.vtree.node(v);
      w.u8(n.is_leaf() ? 0 : 1);
      if (n.is_leaf()) {
        w.u32(n.variable);
      } else {
        w.u32(n.left);
        w.u32(n.right);
      }
    }
    for (NodeId v : m.conformance) w.u32(v);
  }
  w.u32(crc32(w.data()));
  return std::move(w.data());
}

Model parse_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) fail(ErrorKind::Format, "model file too short");
  const std::uint32_t stored =
      ByteReader(bytes.subspan(bytes.size() - 4), "model").u32();
  const auto body = bytes.first(bytes.size() - 4);

  ByteReader r(body, "model");
  if (!r.tag("PCM1")) fail(ErrorKind::Format, "not a PCM1 model file");
  if (crc32(body) != stored) fail(ErrorKind::Checksum, "model file checksum mismatch");
  const auto version = r.u16();
  if (version != kModelVersion) fail(ErrorKind::Format, "unsupported model version " + std::to_string(version));
  const auto flags = r.u16();
  const std::uint32_t d = r.u32();
  if (d == 0 || d > r.remaining() / 4) fail(ErrorKind::Format, "bad variable count");
  std::vector<std::uint32_t> card(d);
  for (auto& k : card) k = r.u32();
  const std::uint64_t num_units = r.u64();
  const std::uint64_t num_edges = r.u64();
  Model m;
  m.seed = r.u64();
  if (num_units == 0 || num_units > r.remaining()) fail(ErrorKind::Format, "bad unit count");

  std::vector<RawUnit> units(num_units);
  std::uint64_t edges = 0;
  for (auto& u : units) {
    const auto kind = r.u8();
    if (kind > 2) fail(ErrorKind::Format, "bad unit kind");
    u.kind = static_cast<UnitKind>(kind);
    if (u.kind == UnitKind::Input) {
      u.variable = r.u32();
      if (u.variable >= d) fail(ErrorKind::Format, "input variable out of range");
      u.probs.resize(card[u.variable]);
      for (auto& p : u.probs) p = r.f64();
      continue;
    }
    const std::uint32_t n = r.u32();
    if (n > r.remaining() / 4) fail(ErrorKind::Format, "bad child count");
    u.children.resize(n);
    for (auto& ch : u.children) ch = r.u32();
    edges += n;
    if (u.kind == UnitKind::Sum) {
      u.params.resize(n);
      for (auto& p : u.params) p = r.f64();
    }
  }
  if (edges != num_edges) fail(ErrorKind::Format, "edge count does not match the header");

  try {
    m.circuit = build_circuit(card, units);
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("model structure: ") + e.what());
  }
  validate(m.circuit);

  if (flags & kFlagVtree) {
    const std::uint32_t nodes = r.u32();
    if (nodes > r.remaining()) fail(ErrorKind::Format, "bad vtree size");
    try {
      for (std::uint32_t v = 0; v < nodes; ++v) {
        if (r.u8() == 0) {
          m.vtree.add_leaf(r.u32());
        } else {
          const auto left = r.u32();
          const auto right = r.u32();
          m.vtree.add_internal(left, right);
        }
      }
      m.vtree.check();
    } catch (const Error& e) {
      fail(ErrorKind::Format, std::string("model vtree: ") + e.what());
    }
    m.conformance.resize(num_units);
    for (auto& v : m.conformance) v = r.u32();
  } else {
    const Model fresh = prepare_model(m.circuit, m.seed);
    m.circuit = fresh.circuit;
    m.vtree = fresh.vtree;
    m.conformance = fresh.conformance;
  }
  if (r.remaining() != 0) fail(ErrorKind::Format, "trailing bytes in model file");

  try {
    finish_model(m);
  } catch (const Error& e) {
    fail(ErrorKind::Format, std::string("model is not ready for coding: ") + e.what());
  }
  return m;
}

void save_model(const std::string& path, const Model& model, bool with_vtree) {
  write_file(path, serialize_model(model, with_vtree));
}

Model load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace pcz
