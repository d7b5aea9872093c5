#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pcz/bit_io.hpp"
#include "pcz/circuit.hpp"

namespace pcz {

inline constexpr unsigned kDefaultPrecision = 16;

// Integer frequencies summing to exactly 2^precision.
struct FrequencyTable {
  unsigned precision = kDefaultPrecision;
  std::vector<std::uint32_t> freq;
  std::vector<std::uint32_t> cum;  // exclusive prefix sums, size K + 1

  std::uint32_t total() const { return 1u << precision; }
  std::size_t size() const { return freq.size(); }
  // Symbol whose interval [cum, cum + freq) holds `slot`.
  Symbol lookup(std::uint32_t slot) const;
};

// Largest-remainder apportionment of `probs` onto 2^precision. Every symbol
// with positive probability gets at least 1; zero-probability symbols get 0.
// Ties go to the lower symbol index. Throws Error(Precision) when K exceeds
// 2^precision and Error(Contract) when probs are negative or do not sum to 1
// within 1e-6.
FrequencyTable quantize(std::span<const double> probs, unsigned precision = kDefaultPrecision);
void quantize(std::span<const double> probs, unsigned precision, FrequencyTable& out);

// Small-state code: rank of (x, symbol), 1 <= x < freq[symbol], among all
// such pairs ordered by x / freq (ties by symbol). Ranks cover exactly
// [1, total - support]. unrank returns false for a rank outside that range.
std::uint64_t small_state_rank(const FrequencyTable& table, std::uint64_t x, Symbol symbol);
bool small_state_unrank(const FrequencyTable& table, std::uint64_t rank, std::uint64_t& x, Symbol& symbol);

// rANS with a 64-bit state and 32-bit renormalization words. The state starts
// at 1 rather than at the lower bound, so short messages emit no words at all
// and the final state is flushed with only as many bits as it needs.
//
// While the state x is below the symbol's frequency f the usual step would
// only add the symbol's start offset, which wastes up to `precision` bits per
// codeword. Those pushes instead map (x, symbol) to its rank among all pairs
// with x < f ordered by x / f, a number in [1, 2^precision) that grows like
// x * 2^precision / f. Regular states are always >= 2^precision, so the
// decoder tells the two cases apart by the state alone.
//
// Codeword layout (bit-granular, LSB-first): the final state without its
// leading 1 bit, then the emitted words, most recent first. From the total bit
// length B the decoder recovers the word count k = B < 31 ? 0 : (B - 31) / 32.
class RansEncoder {
 public:
  // Symbols must be pushed in reverse of the order they will be decoded in.
  void put(const FrequencyTable& table, Symbol symbol);
  // Interval-only push; valid when !needs_table(freq).
  void put(std::uint32_t start, std::uint32_t freq, unsigned precision);
  bool needs_table(std::uint32_t freq) const { return state_ < freq; }
  // Appends the codeword to `out` and returns its bit length. Resets the encoder.
  std::uint64_t finish(BitWriter& out);

 private:
  std::uint64_t state_ = 1;
  std::vector<std::uint32_t> words_;
};

class RansDecoder {
 public:
  // Codeword occupying bits [begin, begin + bit_length) of `bytes`.
  RansDecoder(std::span<const std::uint8_t> bytes, std::uint64_t begin, std::uint64_t bit_length);

  Symbol get(const FrequencyTable& table);
  // Throws Error(Decode) unless the codeword was consumed exactly.
  void finish() const;

 private:
  BitReader reader_;
  std::uint64_t state_ = 1;
  std::uint64_t words_left_ = 0;
};

struct Codeword {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bits = 0;
};

// One-shot helpers: symbols[i] is coded with tables[i].
Codeword encode(std::span<const Symbol> symbols, std::span<const FrequencyTable> tables);

// `table_for(i, prefix)` returns the table for symbol i given the already
// decoded symbols prefix = symbols[0..i).
using TableProvider = std::function<const FrequencyTable&(std::size_t, std::span<const Symbol>)>;
std::vector<Symbol> decode(const Codeword& codeword, std::size_t count, const TableProvider& table_for);

}  // namespace pcz
