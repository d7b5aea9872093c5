#include "pcz/rans.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "pcz/error.hpp"

namespace pcz {

namespace {

constexpr std::uint64_t kLower = std::uint64_t{1} << 31;
constexpr unsigned kWordBits = 32;

}  // namespace

Symbol FrequencyTable::lookup(std::uint32_t slot) const {
  // First cum entry greater than slot, minus one.
  const auto it = std::upper_bound(cum.begin(), cum.end(), slot);
  return static_cast<Symbol>(std::distance(cum.begin(), it) - 1);
}

void quantize(std::span<const double> probs, unsigned precision, FrequencyTable& out) {
  if (precision < 1 || precision > 24) fail(ErrorKind::Precision, "precision must be in [1, 24]");
  const std::size_t k = probs.size();
  const std::uint64_t total = std::uint64_t{1} << precision;
  if (k == 0) fail(ErrorKind::Contract, "empty distribution");
  if (k > total) fail(ErrorKind::Precision, std::to_string(k) + " symbols do not fit in 2^" + std::to_string(precision));

  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::Contract, "negative or non-finite probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail(ErrorKind::Contract, "probabilities sum to " + std::to_string(sum));

  out.precision = precision;
  out.freq.assign(k, 0);
  std::vector<double> ideal(k);
  std::int64_t assigned = 0;
  for (std::size_t v = 0; v < k; ++v) {
    if (probs[v] <= 0.0) continue;
    ideal[v] = probs[v] / sum * static_cast<double>(total);
    out.freq[v] = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::floor(ideal[v])));
    assigned += out.freq[v];
  }

  std::vector<std::uint32_t> idx;
  for (std::size_t v = 0; v < k; ++v)
    if (probs[v] > 0.0) idx.push_back(static_cast<std::uint32_t>(v));

  std::int64_t diff = static_cast<std::int64_t>(total) - assigned;
  while (diff > 0) {
    // Largest remainder first.
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      return ideal[a] - out.freq[a] > ideal[b] - out.freq[b];
    });
    for (std::size_t j = 0; j < idx.size() && diff > 0; ++j, --diff) ++out.freq[idx[j]];
  }
  while (diff < 0) {
    // Floors of 1 overshot: take back from the most over-served symbols.
    std::vector<std::uint32_t> cand;
    for (auto v : idx)
      if (out.freq[v] > 1) cand.push_back(v);
    std::stable_sort(cand.begin(), cand.end(), [&](std::uint32_t a, std::uint32_t b) {
      return out.freq[a] - ideal[a] > out.freq[b] - ideal[b];
    });
    for (std::size_t j = 0; j < cand.size() && diff < 0; ++j, ++diff) --out.freq[cand[j]];
  }

  out.cum.assign(k + 1, 0);
  for (std::size_t v = 0; v < k; ++v) out.cum[v + 1] = out.cum[v] + out.freq[v];
}

FrequencyTable quantize(std::span<const double> probs, unsigned precision) {
  FrequencyTable t;
  quantize(probs, precision, t);
  return t;
}

std::uint64_t small_state_rank(const FrequencyTable& t, std::uint64_t x, Symbol s) {
  const std::uint64_t fs = t.freq[s];
  std::uint64_t rank = x;  // 1 + the pairs (y, s) with y < x
  for (std::size_t r = 0; r < t.size(); ++r) {
    const std::uint64_t fr = t.freq[r];
    if (r == s || fr < 2) continue;
    const std::uint64_t scaled = x * fr;
    rank += std::min(fr - 1, (scaled - 1) / fs);
    if (r < s && scaled % fs == 0 && scaled / fs < fr) ++rank;
  }
  return rank;
}

namespace {

struct SmallPair {
  std::uint64_t x;
  Symbol s;
  std::uint64_t f;
};

bool key_less(const SmallPair& a, const SmallPair& b) {
  const auto l = a.x * b.f, r = b.x * a.f;
  return l != r ? l < r : a.s < b.s;
}

}  // namespace

// The pair with rank q has key x / f within [(q - 1) / total, (q - 1 + K) /
// total], so only pairs in that window are sorted; they hold consecutive ranks.
bool small_state_unrank(const FrequencyTable& t, std::uint64_t q, std::uint64_t& x, Symbol& s) {
  const std::uint64_t total = t.total();
  const std::uint64_t lo = q - 1, hi = q - 1 + t.size();
  std::vector<SmallPair> window;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const std::uint64_t f = t.freq[r];
    if (f < 2) continue;
    const std::uint64_t y_lo = std::max<std::uint64_t>(1, (lo * f + total - 1) / total);
    const std::uint64_t y_hi = std::min<std::uint64_t>(f - 1, hi * f / total);
    for (std::uint64_t y = y_lo; y <= y_hi; ++y) window.push_back({y, static_cast<Symbol>(r), f});
  }
  if (window.empty()) return false;
  std::sort(window.begin(), window.end(), key_less);
  const std::uint64_t first = small_state_rank(t, window[0].x, window[0].s);
  if (q < first || q - first >= window.size()) return false;
  x = window[q - first].x;
  s = window[q - first].s;
  return true;
}

void RansEncoder::put(const FrequencyTable& table, Symbol symbol) {
  if (symbol >= table.size()) fail(ErrorKind::Unencodable, "symbol " + std::to_string(symbol) + " outside the table");
  const std::uint32_t freq = table.freq[symbol];
  if (freq == 0) fail(ErrorKind::Unencodable, "symbol " + std::to_string(symbol) + " has zero frequency");
  if (state_ < freq) {
    state_ = small_state_rank(table, state_, symbol);
    return;
  }
  put(table.cum[symbol], freq, table.precision);
}

void RansEncoder::put(std::uint32_t start, std::uint32_t freq, unsigned precision) {
  if (freq == 0) fail(ErrorKind::Unencodable, "zero frequency");
  if (state_ < freq) fail(ErrorKind::Contract, "state below the frequency; push with the full table");
  const std::uint64_t x_max = ((kLower >> precision) << kWordBits) * freq;
  if (state_ >= x_max) {
    words_.push_back(static_cast<std::uint32_t>(state_));
    state_ >>= kWordBits;
  }
  state_ = ((state_ / freq) << precision) + (state_ % freq) + start;
}

std::uint64_t RansEncoder::finish(BitWriter& out) {
  const auto width = static_cast<unsigned>(std::bit_width(state_));
  const std::uint64_t begin = out.bit_count();
  out.put(state_, width - 1);
  for (auto it = words_.rbegin(); it != words_.rend(); ++it) out.put(*it, kWordBits);
  state_ = 1;
  words_.clear();
  return out.bit_count() - begin;
}

RansDecoder::RansDecoder(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t bit_length)
    : reader_(bytes, begin, begin + bit_length) {
  words_left_ = bit_length < 31 ? 0 : (bit_length - 31) / kWordBits;
  const auto state_bits = static_cast<unsigned>(bit_length - words_left_ * kWordBits);
  state_ = (std::uint64_t{1} << state_bits) | reader_.get(state_bits);
}

Symbol RansDecoder::get(const FrequencyTable& table) {
  if (state_ < table.total()) {
    std::uint64_t x = 0;
    Symbol s = 0;
    if (state_ == 0 || !small_state_unrank(table, state_, x, s)) fail(ErrorKind::Decode, "corrupt codeword");
    state_ = x;
    return s;
  }
  const std::uint32_t mask = table.total() - 1;
  const auto slot = static_cast<std::uint32_t>(state_ & mask);
  const Symbol s = table.lookup(slot);
  if (s >= table.size() || table.freq[s] == 0) fail(ErrorKind::Decode, "corrupt codeword");
  state_ = table.freq[s] * (state_ >> table.precision) + slot - table.cum[s];
  // The encoder only takes this branch from states >= freq; anything else
  // cannot come from a valid codeword.
  if (state_ < table.freq[s]) fail(ErrorKind::Decode, "corrupt codeword");
  if (state_ < kLower && words_left_ > 0) {
    state_ = (state_ << kWordBits) | reader_.get(kWordBits);
    --words_left_;
  }
  return s;
}

void RansDecoder::finish() const {
  if (state_ != 1 || words_left_ != 0 || reader_.remaining() != 0)
    fail(ErrorKind::Decode, "codeword not consumed exactly (corrupt data or wrong model)");
}

Codeword encode(std::span<const Symbol> symbols, std::span<const FrequencyTable> tables) {
  if (symbols.size() != tables.size()) fail(ErrorKind::Contract, "one table per symbol required");
  RansEncoder enc;
  for (std::size_t i = symbols.size(); i-- > 0;) enc.put(tables[i], symbols[i]);
  BitWriter w;
  Codeword cw;
  cw.bits = enc.finish(w);
  cw.bytes = w.take();
  return cw;
}

std::vector<Symbol> decode(const Codeword& cw, std::size_t count, const TableProvider& table_for) {
  RansDecoder dec(cw.bytes, 0, cw.bits);
  std::vector<Symbol> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dec.get(table_for(i, out)));
  dec.finish();
  return out;
}

}  // namespace pcz
