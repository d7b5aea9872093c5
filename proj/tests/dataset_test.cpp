#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pcz/dataset.hpp"
#include "pcz/error.hpp"

namespace pcz {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("pcz_dataset_" + name)).string();
}

Dataset sample_data() {
  Dataset d;
  d.num_samples = 3;
  d.num_vars = 4;
  d.values = {0, 1, 2, 3, 9, 8, 7, 6, 0, 0, 0, 255};
  assign_cardinalities(d, std::nullopt);
  return d;
}

TEST(Dataset, IdxRoundTripKeepsShape) {
  const Dataset d = sample_data();
  const std::vector<std::uint32_t> dims{2, 2};
  const auto bytes = serialize_idx(d, dims);
  EXPECT_EQ(bytes.size(), 4u + 3 * 4 + 12);
  EXPECT_EQ(bytes[3], 3);  // three dimensions: N, 2, 2
  const Dataset back = parse_idx(bytes);
  EXPECT_EQ(back.values, d.values);
  EXPECT_EQ(back.sample_dims, dims);
  // One shared cardinality: the largest value + 1.
  EXPECT_EQ(back.cardinalities, (std::vector<std::uint32_t>(4, 256)));
  // No shape given: one flat dimension.
  EXPECT_EQ(parse_idx(serialize_idx(d, {})).sample_dims, (std::vector<std::uint32_t>{4}));
}

TEST(Dataset, IdxRejectsGarbage) {
  auto bytes = serialize_idx(sample_data(), {});
  bytes.pop_back();
  EXPECT_THROW(parse_idx(bytes), Error);
  bytes = serialize_idx(sample_data(), {});
  bytes[2] = 0x0d;  // float payload
  EXPECT_THROW(parse_idx(bytes), Error);
}

TEST(Dataset, TextAndRawRoundTrip) {
  const Dataset d = sample_data();
  write_text(temp_path("t.txt"), d);
  EXPECT_EQ(read_text(temp_path("t.txt")).values, d.values);
  write_raw(temp_path("r.bin"), d);
  EXPECT_EQ(read_raw(temp_path("r.bin"), 4).values, d.values);
  EXPECT_THROW(read_raw(temp_path("r.bin"), 5), Error);
}

TEST(Dataset, TextAcceptsMixedSeparators) {
  {
    std::ofstream out(temp_path("mixed.txt"));
    out << "1,2 3\n4\t5,6\n\n";
  }
  const Dataset d = read_text(temp_path("mixed.txt"));
  EXPECT_EQ(d.num_samples, 2u);
  EXPECT_EQ(d.values, (std::vector<Symbol>{1, 2, 3, 4, 5, 6}));
  {
    std::ofstream out(temp_path("ragged.txt"));
    out << "1,2\n3\n";
  }
  EXPECT_THROW(read_text(temp_path("ragged.txt")), Error);
}

TEST(Dataset, IngestOptions) {
  write_idx(temp_path("i.idx"), sample_data(), std::vector<std::uint32_t>{4});
  IngestSpec spec;
  spec.path = temp_path("i.idx");
  spec.limit = 2;
  spec.binarize_threshold = 5;
  const Dataset d = load_dataset(spec);
  EXPECT_EQ(d.num_samples, 2u);
  EXPECT_EQ(d.values, (std::vector<Symbol>{0, 0, 0, 0, 1, 1, 1, 1}));
  EXPECT_EQ(d.cardinalities, (std::vector<std::uint32_t>(4, 2)));

  spec.binarize_threshold.reset();
  spec.cardinality = 4;  // 9 does not fit
  EXPECT_THROW(load_dataset(spec), Error);
  EXPECT_EQ(parse_data_format("csv"), DataFormat::Text);
  EXPECT_THROW(parse_data_format("png"), Error);
}

TEST(Dataset, MissingFileIsIoError) {
  try {
    read_idx(temp_path("does_not_exist.idx"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

}  // namespace
}  // namespace pcz
