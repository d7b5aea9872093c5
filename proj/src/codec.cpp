#include "pcz/codec.hpp"

#include <chrono>
#include <cmath>

#include "pcz/byte_io.hpp"
#include "pcz/error.hpp"
#include "pcz/learner.hpp"
#include "pcz/parallel.hpp"

namespace pcz {

namespace {

constexpr std::uint16_t kArchiveVersion = 1;
constexpr std::size_t kSamplesPerTask = 16;

// Per-sample coding state; encoder and decoder drive it identically.
struct SampleCoder {
  PrefixEvaluator eval;
  std::vector<double> probs;
  FrequencyTable table;
  unsigned precision;

  SampleCoder(const Model& m, unsigned precision) : eval(m.circuit, m.schedule, m.p_down), precision(precision) {}

  const FrequencyTable& next_table() {
    eval.conditional(probs);
    quantize(probs, precision, table);
    return table;
  }
};

// Runs the forward pass for one sample and records the (start, freq) pair of
// every step, and the full tables when `tables` is given. Returns log p(x).
double forward_sample(SampleCoder& sc, const Model& m, std::span<const Symbol> x, std::span<std::uint32_t> start,
                      std::span<std::uint32_t> freq, std::vector<FrequencyTable>* tables = nullptr) {
  sc.eval.reset();
  double f = 0.0;
  for (std::size_t i = 0; i < m.order.size(); ++i) {
    const auto var = m.order[i];
    const auto& t = sc.next_table();
    const Symbol s = x[var];
    if (t.freq[s] == 0)
      fail(ErrorKind::Unencodable, "variable " + std::to_string(var) + ": value " + std::to_string(s) +
                                       " has zero probability under the model");
    start[i] = t.cum[s];
    freq[i] = t.freq[s];
    if (tables) (*tables)[i] = t;
    f = sc.eval.commit(s);
  }
  return f;
}

void check_data(const Model& m, const Dataset& data) {
  if (data.num_vars != m.circuit.num_vars())
    fail(ErrorKind::Contract, "data has " + std::to_string(data.num_vars) + " values per sample, model expects " +
                                  std::to_string(m.circuit.num_vars()));
  for (std::size_t n = 0; n < data.num_samples; ++n) {
    const auto r = data.row(n);
    for (std::size_t d = 0; d < r.size(); ++d)
      if (r[d] >= m.circuit.cardinality(static_cast<std::uint32_t>(d)))
        fail(ErrorKind::Contract, "sample " + std::to_string(n) + ", variable " + std::to_string(d) +
                                      ": value outside the model's cardinality");
  }
}

void append_bits(BitWriter& w, std::span<const std::uint8_t> bytes, std::uint64_t bits) {
  std::uint64_t done = 0;
  for (std::size_t i = 0; done < bits; ++i) {
    const unsigned n = static_cast<unsigned>(std::min<std::uint64_t>(8, bits - done));
    w.put(bytes[i], n);
    done += n;
  }
}

}  // namespace

ArchiveLayout parse_layout(const std::string& name) {
  if (name == "per-sample") return ArchiveLayout::PerSample;
  if (name == "stream") return ArchiveLayout::Stream;
  fail(ErrorKind::Contract, "unknown archive layout '" + name + "' (expected per-sample or stream)");
}

const char* to_string(ArchiveLayout layout) {
  return layout == ArchiveLayout::Stream ? "stream" : "per-sample";
}

std::uint64_t Archive::payload_bits() const {
  std::uint64_t b = 0;
  for (auto n : bit_lengths) b += n;
  return b;
}

std::vector<std::uint8_t> serialize_archive(const Archive& a) {
  ByteWriter w;
  w.tag("PCZ1");
  w.u16(kArchiveVersion);
  w.u16(static_cast<std::uint16_t>(a.layout));
  w.u32(a.model_checksum);
  w.u64(a.num_samples);
  w.u32(a.num_vars);
  w.u8(a.precision);
  for (auto n : a.bit_lengths) w.leb128(n);
  w.bytes(a.payload);
  w.u32(crc32(w.data()));
  return std::move(w.data());
}

Archive parse_archive(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) fail(ErrorKind::Format, "archive too short");
  const auto body = bytes.first(bytes.size() - 4);
  ByteReader r(body, "archive");
  if (!r.tag("PCZ1")) fail(ErrorKind::Format, "not a PCZ1 archive");
  if (crc32(body) != ByteReader(bytes.subspan(bytes.size() - 4), "archive").u32())
    fail(ErrorKind::Checksum, "archive checksum mismatch (file is corrupt)");
  if (r.u16() != kArchiveVersion) fail(ErrorKind::Format, "unsupported archive version");
  Archive a;
  const auto layout = r.u16();
  if (layout > 1) fail(ErrorKind::Format, "unknown archive layout");
  a.layout = static_cast<ArchiveLayout>(layout);
  a.model_checksum = r.u32();
  a.num_samples = r.u64();
  a.num_vars = r.u32();
  a.precision = r.u8();
  const std::uint64_t entries = a.layout == ArchiveLayout::Stream ? 1 : a.num_samples;
  if (entries > r.remaining()) fail(ErrorKind::Format, "bad sample count");
  a.bit_lengths.resize(entries);
  for (auto& n : a.bit_lengths) n = r.leb128();
  const std::uint64_t bits = a.payload_bits();
  if ((bits + 7) / 8 != r.remaining()) fail(ErrorKind::Format, "payload size does not match the codeword lengths");
  const auto p = r.bytes(r.remaining());
  a.payload.assign(p.begin(), p.end());
  return a;
}

CompressResult compress(const Model& m, const Dataset& data, const CompressOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  check_data(m, data);
  for (std::uint32_t v = 0; v < m.circuit.num_vars(); ++v)
    if (m.circuit.cardinality(v) > (1u << opt.precision))
      fail(ErrorKind::Precision, "variable " + std::to_string(v) + " has more values than 2^precision");

  const std::size_t n = data.num_samples;
  const std::size_t d = m.circuit.num_vars();
  CompressResult res;
  Archive& a = res.archive;
  a.layout = opt.layout;
  a.model_checksum = m.checksum;
  a.num_samples = n;
  a.num_vars = static_cast<std::uint32_t>(d);
  a.precision = static_cast<std::uint8_t>(opt.precision);

  std::vector<double> log_p(n);
  const std::size_t tasks = (n + kSamplesPerTask - 1) / kSamplesPerTask;
  BitWriter payload;

  if (opt.layout == ArchiveLayout::PerSample) {
    std::vector<Codeword> words(n);
    parallel_for(tasks, opt.threads, [&](std::size_t t) {
      SampleCoder sc(m, opt.precision);
      std::vector<std::uint32_t> start(d), freq(d);
      std::vector<FrequencyTable> tables(d);
      for (std::size_t s = t * kSamplesPerTask; s < std::min(n, (t + 1) * kSamplesPerTask); ++s) {
        const auto x = data.row(s);
        log_p[s] = forward_sample(sc, m, x, start, freq, &tables);
        RansEncoder enc;
        for (std::size_t i = d; i-- > 0;) enc.put(tables[i], x[m.order[i]]);
        BitWriter w;
        words[s].bits = enc.finish(w);
        words[s].bytes = w.take();
      }
    });
    for (const auto& w : words) {
      a.bit_lengths.push_back(w.bits);
      append_bits(payload, w.bytes, w.bits);
    }
  } else {
    std::vector<std::uint32_t> start(n * d), freq(n * d);
    parallel_for(tasks, opt.threads, [&](std::size_t t) {
      SampleCoder sc(m, opt.precision);
      for (std::size_t s = t * kSamplesPerTask; s < std::min(n, (t + 1) * kSamplesPerTask); ++s)
        log_p[s] = forward_sample(sc, m, data.row(s), {start.data() + s * d, d}, {freq.data() + s * d, d});
    });
    // Only the first pushes (the end of the last samples) start from a small
    // state and need whole tables; those samples are re-run on demand.
    RansEncoder enc;
    SampleCoder sc(m, opt.precision);
    std::vector<FrequencyTable> tables(d);
    std::vector<std::uint32_t> scratch_start(d), scratch_freq(d);
    std::size_t tables_of = n;
    for (std::size_t k = n * d; k-- > 0;) {
      if (!enc.needs_table(freq[k])) {
        enc.put(start[k], freq[k], opt.precision);
        continue;
      }
      const std::size_t s = k / d;
      if (tables_of != s) {
        forward_sample(sc, m, data.row(s), scratch_start, scratch_freq, &tables);
        tables_of = s;
      }
      enc.put(tables[k % d], data.row(s)[m.order[k % d]]);
    }
    a.bit_lengths.push_back(enc.finish(payload));
  }
  a.payload = payload.take();

  auto& st = res.stats;
  st.num_samples = n;
  st.num_vars = d;
  if (n > 0) {
    const double nd = static_cast<double>(n * d);
    double bits = 0.0;
    for (double lp : log_p) bits += -lp / std::log(2.0);
    st.theoretical_bpd = bits / nd;
    st.codeword_bpd = static_cast<double>(a.payload_bits()) / nd;
    st.archive_bpd = 8.0 * static_cast<double>(serialize_archive(a).size()) / nd;
    if (a.layout == ArchiveLayout::PerSample) {
      double sum = 0.0, worst = -1e300;
      for (std::size_t s = 0; s < n; ++s) {
        const double g = (static_cast<double>(a.bit_lengths[s]) + log_p[s] / std::log(2.0)) / static_cast<double>(d);
        sum += g;
        worst = std::max(worst, g);
      }
      st.mean_sample_gap = sum / static_cast<double>(n);
      st.max_sample_gap = worst;
    }
  }
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

Dataset decompress(const Model& m, const Archive& a, unsigned threads) {
  if (a.model_checksum != m.checksum)
    fail(ErrorKind::Checksum, "archive was written with a different model");
  if (a.num_vars != m.circuit.num_vars()) fail(ErrorKind::Format, "archive and model disagree on D");
  if (a.precision < 1 || a.precision > 24) fail(ErrorKind::Format, "bad archive precision");
  const std::size_t n = a.num_samples;
  const std::size_t d = a.num_vars;
  const std::uint64_t total_bits = a.payload_bits();
  if ((total_bits + 7) / 8 != a.payload.size()) fail(ErrorKind::Format, "payload size mismatch");

  Dataset out;
  out.num_samples = n;
  out.num_vars = d;
  out.cardinalities.assign(m.circuit.cardinalities().begin(), m.circuit.cardinalities().end());
  out.values.resize(n * d);

  auto decode_sample = [&](SampleCoder& sc, RansDecoder& dec, std::size_t s) {
    sc.eval.reset();
    auto row = out.row(s);
    for (std::size_t i = 0; i < d; ++i) {
      const Symbol v = dec.get(sc.next_table());
      row[m.order[i]] = v;
      sc.eval.commit(v);
    }
  };

  if (a.layout == ArchiveLayout::PerSample) {
    if (a.bit_lengths.size() != n) fail(ErrorKind::Format, "missing codeword lengths");
    std::vector<std::uint64_t> offset(n + 1, 0);
    for (std::size_t s = 0; s < n; ++s) offset[s + 1] = offset[s] + a.bit_lengths[s];
    const std::size_t tasks = (n + kSamplesPerTask - 1) / kSamplesPerTask;
    parallel_for(tasks, threads, [&](std::size_t t) {
      SampleCoder sc(m, a.precision);
      for (std::size_t s = t * kSamplesPerTask; s < std::min(n, (t + 1) * kSamplesPerTask); ++s) {
        RansDecoder dec(a.payload, offset[s], a.bit_lengths[s]);
        decode_sample(sc, dec, s);
        dec.finish();
      }
    });
  } else {
    if (a.bit_lengths.size() != 1) fail(ErrorKind::Format, "stream archive needs one codeword length");
    SampleCoder sc(m, a.precision);
    RansDecoder dec(a.payload, 0, total_bits);
    for (std::size_t s = 0; s < n; ++s) decode_sample(sc, dec, s);
    dec.finish();
  }
  return out;
}

double eval_bpd(const Circuit& c, const Dataset& data, unsigned threads) { return bits_per_dim(c, data, threads); }

}  // namespace pcz
