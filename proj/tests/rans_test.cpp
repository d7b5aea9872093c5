#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "pcz/error.hpp"
#include "pcz/rans.hpp"

namespace pcz {
namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind{0};
}

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t k, double zero_rate = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& x : p) {
    x = u(rng) < zero_rate ? 0.0 : std::pow(u(rng), 3.0);
    s += x;
  }
  if (s == 0.0) {
    p[0] = 1.0;
    s = 1.0;
  }
  for (auto& x : p) x /= s;
  return p;
}

TEST(Quantize, HandExamples) {
  EXPECT_EQ(quantize(std::vector<double>{0.5, 0.5}, 1).freq, (std::vector<std::uint32_t>{1, 1}));
  EXPECT_EQ(quantize(std::vector<double>{0.25, 0.75}, 2).freq, (std::vector<std::uint32_t>{1, 3}));
  // 16/3 each: floors 5, one leftover unit goes to the lowest index.
  EXPECT_EQ(quantize(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, 4).freq, (std::vector<std::uint32_t>{6, 5, 5}));
  // Floor of 1 for a tiny probability; zero stays zero.
  EXPECT_EQ(quantize(std::vector<double>{1e-9, 1.0 - 1e-9, 0.0}, 4).freq, (std::vector<std::uint32_t>{1, 15, 0}));
  auto t = quantize(std::vector<double>{0.1, 0.2, 0.7}, 8);
  EXPECT_EQ(t.cum, (std::vector<std::uint32_t>{0, t.freq[0], t.freq[0] + t.freq[1], 256}));
  EXPECT_EQ(t.lookup(0), 0);
  EXPECT_EQ(t.lookup(t.cum[1]), 1);
  EXPECT_EQ(t.lookup(255), 2);
}

TEST(Quantize, Errors) {
  EXPECT_EQ(kind_of([] { quantize(std::vector<double>{0.25, 0.25, 0.5}, 1); }), ErrorKind::Precision);
  EXPECT_EQ(kind_of([] { quantize(std::vector<double>{0.5, 0.5}, 0); }), ErrorKind::Precision);
  EXPECT_EQ(kind_of([] { quantize(std::vector<double>{0.5, 0.5}, 25); }), ErrorKind::Precision);
  EXPECT_EQ(kind_of([] { quantize(std::vector<double>{0.5, 0.6}, 16); }), ErrorKind::Contract);
  EXPECT_EQ(kind_of([] { quantize(std::vector<double>{1.5, -0.5}, 16); }), ErrorKind::Contract);
  // Within the 1e-6 tolerance is accepted.
  EXPECT_EQ(kind_of([] { quantize(std::vector<double>{0.5, 0.5 + 5e-7}, 16); }), ErrorKind{0});
}

TEST(Quantize, TablesSumExactlyAndKeepSupport) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 3000; ++t) {
    const std::size_t k = 1 + rng() % 300;
    const unsigned s = 9 + static_cast<unsigned>(rng() % 16);
    const auto p = random_probs(rng, k, 0.2);
    const auto tab = quantize(p, s);
    ASSERT_EQ(tab.cum.back(), tab.total());
    EXPECT_EQ(std::accumulate(tab.freq.begin(), tab.freq.end(), std::uint64_t{0}), std::uint64_t{1} << s);
    bool floors_bind = false;
    for (std::size_t v = 0; v < k; ++v) {
      EXPECT_EQ(tab.freq[v] > 0, p[v] > 0.0);
      if (p[v] > 0.0 && p[v] * tab.total() < 1.0) floors_bind = true;
    }
    // Without floors the result is a proper rounding of the ideal counts.
    if (!floors_bind) {
      for (std::size_t v = 0; v < k; ++v) EXPECT_LT(std::abs(tab.freq[v] - p[v] * tab.total()), 1.0);
    }
  }
}

TEST(Rans, RoundTripRandomTables) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = rng() % 40;
    std::vector<FrequencyTable> tables;
    std::vector<Symbol> symbols;
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned s = 8 + static_cast<unsigned>(rng() % 17);
      tables.push_back(quantize(random_probs(rng, 1 + rng() % 20, 0.3), s));
      std::discrete_distribution<int> d(tables.back().freq.begin(), tables.back().freq.end());
      symbols.push_back(static_cast<Symbol>(d(rng)));
    }
    const Codeword cw = encode(symbols, tables);
    const auto back = decode(cw, n, [&](std::size_t i, std::span<const Symbol> prefix) -> const FrequencyTable& {
      EXPECT_EQ(prefix.size(), i);
      return tables[i];
    });
    ASSERT_EQ(back, symbols) << "trial " << t;
  }
}

TEST(Rans, FairCoinCostsOneBitPerSymbol) {
  std::mt19937_64 rng(3);
  const auto table = quantize(std::vector<double>{0.5, 0.5});
  std::vector<Symbol> symbols(1000);
  for (auto& s : symbols) s = static_cast<Symbol>(rng() & 1);
  std::vector<FrequencyTable> tables(1000, table);
  const auto cw = encode(symbols, tables);
  EXPECT_GE(cw.bits, 1000u - 8);
  EXPECT_LE(cw.bits, 1000u + 32);
}

TEST(Rans, DeterministicTableCostsNothing) {
  const auto table = quantize(std::vector<double>{0.0, 1.0, 0.0});
  std::vector<Symbol> symbols(500, 1);
  std::vector<FrequencyTable> tables(500, table);
  const auto cw = encode(symbols, tables);
  EXPECT_LE(cw.bits, 1u);
  const auto back = decode(cw, 500, [&](std::size_t, std::span<const Symbol>) -> const FrequencyTable& { return table; });
  EXPECT_EQ(back, symbols);
}

TEST(Rans, IidRateIsNearEntropy) {
  std::mt19937_64 rng(4);
  for (std::size_t k : {2u, 5u, 17u, 256u}) {
    const auto p = random_probs(rng, k);
    const auto table = quantize(p);
    double entropy = 0.0;
    for (double q : p)
      if (q > 0.0) entropy -= q * std::log2(q);
    const std::size_t n = 200000;
    std::discrete_distribution<int> d(p.begin(), p.end());
    std::vector<Symbol> symbols(n);
    for (auto& s : symbols) s = static_cast<Symbol>(d(rng));
    std::vector<FrequencyTable> tables(n, table);
    const auto cw = encode(symbols, tables);
    // Sampling noise of the empirical entropy is far below the 0.01 budget at this n.
    double empirical = 0.0;
    std::vector<std::size_t> count(k, 0);
    for (auto s : symbols) ++count[s];
    for (std::size_t v = 0; v < k; ++v)
      if (count[v]) empirical -= static_cast<double>(count[v]) * std::log2(p[v]);
    empirical /= static_cast<double>(n);
    const double rate = static_cast<double>(cw.bits) / static_cast<double>(n);
    EXPECT_LT(rate - empirical, 0.01) << "K=" << k << " H=" << entropy;
    EXPECT_GT(rate - empirical, -0.01);
  }
}

// Pushes from states below the symbol frequency are ranked by x / f; the
// ranks of all such pairs must be exactly 1 .. total - support, in key order.
TEST(Rans, SmallStateCodeIsABijection) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 300; ++t) {
    const unsigned s = 4 + static_cast<unsigned>(rng() % 7);
    const auto table = quantize(random_probs(rng, 1 + rng() % 12, 0.2), s);
    std::size_t support = 0;
    struct Pair {
      std::uint64_t x;
      Symbol sym;
    };
    std::vector<Pair> pairs;
    for (Symbol sym = 0; sym < table.size(); ++sym) {
      support += table.freq[sym] > 0;
      for (std::uint32_t x = 1; x < table.freq[sym]; ++x) pairs.push_back({x, sym});
    }
    // Oracle: sort by x / f with exact cross multiplication.
    std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
      const auto l = a.x * table.freq[b.sym], r = b.x * table.freq[a.sym];
      return l != r ? l < r : a.sym < b.sym;
    });
    ASSERT_EQ(pairs.size(), table.total() - support);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      EXPECT_EQ(small_state_rank(table, pairs[i].x, pairs[i].sym), i + 1);
      std::uint64_t x = 0;
      Symbol sym = 0;
      ASSERT_TRUE(small_state_unrank(table, i + 1, x, sym));
      EXPECT_EQ(x, pairs[i].x);
      EXPECT_EQ(sym, pairs[i].sym);
    }
    std::uint64_t x = 0;
    Symbol sym = 0;
    EXPECT_FALSE(small_state_unrank(table, pairs.size() + 1, x, sym));
  }
}

TEST(Rans, PerCodewordOverheadIsSmall) {
  std::mt19937_64 rng(7);
  double total = 0.0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::vector<FrequencyTable> tables;
    std::vector<Symbol> symbols;
    double info = 0.0;
    for (int i = 0; i < 64; ++i) {
      tables.push_back(quantize(random_probs(rng, 17)));
      std::discrete_distribution<int> d(tables.back().freq.begin(), tables.back().freq.end());
      symbols.push_back(static_cast<Symbol>(d(rng)));
      info -= std::log2(tables.back().freq[symbols.back()] / 65536.0);
    }
    total += static_cast<double>(encode(symbols, tables).bits) - info;
  }
  // Without the small-state code this is about +10 bits.
  EXPECT_LT(total / trials, 1.0);
  EXPECT_GT(total / trials, -4.0);
}

TEST(Rans, ZeroFrequencySymbolIsUnencodable) {
  const auto table = quantize(std::vector<double>{0.5, 0.0, 0.5});
  RansEncoder e;
  EXPECT_EQ(kind_of([&] { e.put(table, 1); }), ErrorKind::Unencodable);
  EXPECT_EQ(kind_of([&] { e.put(table, 3); }), ErrorKind::Unencodable);
}

TEST(Rans, CorruptCodewordIsDetected) {
  std::mt19937_64 rng(5);
  int detected = 0, trials = 300;
  for (int t = 0; t < trials; ++t) {
    std::vector<FrequencyTable> tables;
    std::vector<Symbol> symbols;
    for (int i = 0; i < 50; ++i) {
      tables.push_back(quantize(random_probs(rng, 8)));
      std::discrete_distribution<int> d(tables.back().freq.begin(), tables.back().freq.end());
      symbols.push_back(static_cast<Symbol>(d(rng)));
    }
    auto cw = encode(symbols, tables);
    auto provider = [&](std::size_t i, std::span<const Symbol>) -> const FrequencyTable& { return tables[i]; };
    // A truncated codeword can only decode if it is the codeword of other symbols.
    Codeword cut = cw;
    cut.bits -= 1;
    try {
      EXPECT_NE(decode(cut, 50, provider), symbols);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Decode);
    }
    // A flipped bit either fails or decodes to something else.
    const std::uint64_t bit = rng() % cw.bits;
    cw.bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      if (decode(cw, 50, provider) != symbols) ++detected;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Decode);
      ++detected;
    }
  }
  EXPECT_EQ(detected, trials);
}

}  // namespace
}  // namespace pcz
