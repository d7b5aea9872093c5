#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pcz/codec.hpp"
#include "pcz/error.hpp"
#include "test_support.hpp"

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

// Fully factorized uniform model over D variables with K values each.
Model uniform_model(std::size_t d, std::uint32_t k) {
  std::vector<RawUnit> u;
  std::vector<UnitId> level;
  for (std::uint32_t v = 0; v < d; ++v) {
    u.push_back(RawUnit::input(v, std::vector<double>(k, 1.0 / k)));
    level.push_back(v);
  }
  while (level.size() > 1) {
    std::vector<UnitId> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      u.push_back(RawUnit::product({level[i], level[i + 1]}));
      next.push_back(static_cast<UnitId>(u.size() - 1));
    }
    if (level.size() % 2) next.push_back(level.back());
    level = next;
  }
  return prepare_model(build_circuit(u));
}

Dataset uniform_data(std::mt19937_64& rng, std::size_t n, std::size_t d, std::uint32_t k) {
  Dataset data;
  data.num_samples = n;
  data.num_vars = d;
  data.cardinalities.assign(d, k);
  data.values.resize(n * d);
  for (auto& v : data.values) v = static_cast<Symbol>(rng() % k);
  return data;
}

Model trained_model(const Dataset& data, std::uint64_t seed) {
  auto tree = chow_liu_tree(mutual_information(data, 0));
  Circuit c = compile_hclt({tree, 3, seed}, data.cardinalities);
  return prepare_model(c, seed);
}

TEST(Codec, EmptyDataset) {
  Model m = uniform_model(4, 3);
  Dataset empty;
  empty.num_vars = 4;
  empty.cardinalities.assign(4, 3);
  for (auto layout : {ArchiveLayout::PerSample, ArchiveLayout::Stream}) {
    auto r = compress(m, empty, {layout});
    EXPECT_EQ(r.archive.num_samples, 0u);
    const Archive a = parse_archive(serialize_archive(r.archive));
    const Dataset back = decompress(m, a);
    EXPECT_EQ(back.num_samples, 0u);
    EXPECT_EQ(back.num_vars, 4u);
  }
}

TEST(Codec, UniformSourceCostsLog2KPerDimension) {
  std::mt19937_64 rng(1);
  for (std::uint32_t k : {2u, 5u, 16u}) {
    Model m = uniform_model(16, k);
    auto data = uniform_data(rng, 2000, 16, k);
    auto stream = compress(m, data, {ArchiveLayout::Stream});
    EXPECT_NEAR(stream.stats.theoretical_bpd, std::log2(k), 1e-9);
    EXPECT_NEAR(stream.stats.codeword_bpd, std::log2(k), 0.02) << "K=" << k;
    EXPECT_NEAR(stream.stats.archive_bpd, std::log2(k), 0.02) << "K=" << k;
    // Independent codewords lean on the stored bit length, so they can end up
    // a few bits shorter than -log2 p; the archive pays for the lengths.
    auto per = compress(m, data, {ArchiveLayout::PerSample});
    EXPECT_GE(per.stats.gap(), -4.0 / 16);
    EXPECT_LE(per.stats.gap(), 1.0 / 16);
    EXPECT_LE(per.stats.max_sample_gap, 2.0 / 16);
    EXPECT_GT(per.stats.archive_bpd, per.stats.codeword_bpd);
  }
}

TEST(Codec, RoundTripBothLayouts) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 6; ++t) {
    auto data = testing::tree_data(rng, 150, 5 + t * 3, 2 + t % 3);
    Model m = trained_model(data, static_cast<std::uint64_t>(t));
    for (auto layout : {ArchiveLayout::PerSample, ArchiveLayout::Stream}) {
      auto r = compress(m, data, {layout, 16, 2});
      const auto bytes = serialize_archive(r.archive);
      EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PCZ1");
      const Dataset back = decompress(m, parse_archive(bytes), 2);
      EXPECT_EQ(back.values, data.values);
      EXPECT_NEAR(r.stats.theoretical_bpd, eval_bpd(m.circuit, data, 1), 1e-9);
    }
  }
}

TEST(Codec, LowPrecisionStillRoundTrips) {
  std::mt19937_64 rng(3);
  auto data = testing::tree_data(rng, 100, 6, 4);
  Model m = trained_model(data, 3);
  for (unsigned s : {3u, 8u, 24u}) {
    auto r = compress(m, data, {ArchiveLayout::PerSample, s, 1});
    EXPECT_EQ(decompress(m, r.archive).values, data.values) << s;
  }
  EXPECT_EQ(kind_of([&] { compress(m, data, {ArchiveLayout::PerSample, 1, 1}); }), ErrorKind::Precision);
}

TEST(Codec, OutputDoesNotDependOnThreads) {
  std::mt19937_64 rng(4);
  auto data = testing::tree_data(rng, 120, 9, 3);
  Model m = trained_model(data, 4);
  for (auto layout : {ArchiveLayout::PerSample, ArchiveLayout::Stream}) {
    const auto a = serialize_archive(compress(m, data, {layout, 16, 1}).archive);
    const auto b = serialize_archive(compress(m, data, {layout, 16, 3}).archive);
    EXPECT_EQ(a, b);
  }
}

TEST(Codec, CorruptArchiveAndWrongModelAreRejected) {
  std::mt19937_64 rng(5);
  auto data = testing::tree_data(rng, 50, 6, 3);
  Model m = trained_model(data, 5);
  Model other = trained_model(data, 6);
  auto bytes = serialize_archive(compress(m, data).archive);
  EXPECT_EQ(kind_of([&] { decompress(other, parse_archive(bytes)); }), ErrorKind::Checksum);
  for (std::size_t at : {std::size_t{5}, bytes.size() / 2, bytes.size() - 6}) {
    auto bad = bytes;
    bad[at] ^= 0x01;
    EXPECT_EQ(kind_of([&] { parse_archive(bad); }), ErrorKind::Checksum) << at;
  }
  // A payload that passes the checksum but is not a codeword.
  Archive a = parse_archive(bytes);
  a.payload[0] ^= 0x80;
  try {
    EXPECT_NE(decompress(m, a).values, data.values);
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::Decode || e.kind() == ErrorKind::Unencodable ||
                e.kind() == ErrorKind::Numerical);
  }
}

TEST(Codec, DataMustFitTheModel) {
  Model m = uniform_model(4, 3);
  std::mt19937_64 rng(6);
  auto wide = uniform_data(rng, 3, 5, 3);
  EXPECT_EQ(kind_of([&] { compress(m, wide); }), ErrorKind::Contract);
  auto big = uniform_data(rng, 3, 4, 3);
  big.values[2] = 7;
  EXPECT_EQ(kind_of([&] { compress(m, big); }), ErrorKind::Contract);
}

TEST(Codec, ZeroProbabilitySampleIsUnencodable) {
  Model m = prepare_model(testing::fig1_circuit());
  Dataset data;
  data.num_samples = 1;
  data.num_vars = 4;
  data.cardinalities.assign(4, 2);
  data.values = {0, 1, 0, 0};
  EXPECT_EQ(kind_of([&] { compress(m, data); }), ErrorKind::Unencodable);
}

TEST(Codec, EvalBpd) {
  std::mt19937_64 rng(7);
  EXPECT_DOUBLE_EQ(eval_bpd(uniform_model(8, 2).circuit, uniform_data(rng, 10, 8, 2)), 1.0);
  Circuit c = testing::fig5_circuit();
  Dataset data;
  data.num_samples = 2;
  data.num_vars = 3;
  data.cardinalities.assign(3, 2);
  data.values = {0, 1, 1, 1, 0, 0};
  const double p0 = testing::oracle_probability(c, std::vector<int>{0, 1, 1});
  const double p1 = testing::oracle_probability(c, std::vector<int>{1, 0, 0});
  EXPECT_NEAR(eval_bpd(c, data), -(std::log2(p0) + std::log2(p1)) / 6, 1e-12);
}

TEST(Codec, LayoutNames) {
  EXPECT_EQ(parse_layout("stream"), ArchiveLayout::Stream);
  EXPECT_EQ(parse_layout("per-sample"), ArchiveLayout::PerSample);
  EXPECT_STREQ(to_string(ArchiveLayout::Stream), "stream");
  EXPECT_THROW(parse_layout("zip"), Error);
}

}  // namespace
}  // namespace pcz
