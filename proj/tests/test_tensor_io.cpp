#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "specseg/error.hpp"
#include "specseg/tensor_io.hpp"
#include "support.hpp"

using namespace specseg;

namespace {

FeatureMap random_map(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w, std::uint32_t d) {
  std::normal_distribution<float> n(0.0f, 3.0f);
  FeatureMap fm;
  fm.height = h;
  fm.width = w;
  fm.channels = d;
  for (std::size_t i = 0; i < std::size_t{h} * w * d; ++i) fm.data.push_back(n(rng));
  return fm;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

void put_u32(std::vector<std::uint8_t>& b, std::size_t at, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) b[at + k] = static_cast<std::uint8_t>(v >> (8 * k));
}

}  // namespace

TEST_CASE("fmap minimal file decodes") {
  std::vector<std::uint8_t> b = bytes_of("FMAP");
  b.resize(24 + 12 * 4);
  put_u32(b, 4, 1);
  put_u32(b, 8, 2);
  put_u32(b, 12, 2);
  put_u32(b, 16, 3);
  put_u32(b, 20, 0);
  for (std::uint32_t i = 0; i < 12; ++i) {
    const float f = static_cast<float>(i) * 0.5f;
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(b, 24 + 4 * i, u);
  }
  const auto fm = decode_feature_map(b, "x");
  CHECK(fm.height == 2);
  CHECK(fm.width == 2);
  CHECK(fm.channels == 3);
  CHECK(fm.data[11] == 5.5f);
  CHECK(fm.pixel(1)[0] == 1.5f);

  SUBCASE("bad magic") {
    b[0] = 'X';
    CHECK_THROWS_AS(decode_feature_map(b), FormatError);
  }
  SUBCASE("short payload") {
    b.resize(b.size() - 4);
    CHECK_THROWS_AS(decode_feature_map(b), TruncationError);
  }
  SUBCASE("trailing bytes") {
    b.push_back(0);
    CHECK_THROWS_AS(decode_feature_map(b), TruncationError);
  }
  SUBCASE("version") {
    put_u32(b, 4, 2);
    CHECK_THROWS_AS(decode_feature_map(b), FormatError);
  }
  SUBCASE("dtype") {
    put_u32(b, 20, 1);
    CHECK_THROWS_AS(decode_feature_map(b), FormatError);
  }
  SUBCASE("grid too small") {
    put_u32(b, 8, 1);
    CHECK_THROWS_AS(decode_feature_map(b), FormatError);
  }
  SUBCASE("nan payload") {
    put_u32(b, 24, 0x7fc00000u);
    CHECK_THROWS_AS(decode_feature_map(b), DataError);
  }
  SUBCASE("inf payload") {
    put_u32(b, 28, 0x7f800000u);
    CHECK_THROWS_AS(decode_feature_map(b), DataError);
  }
}

TEST_CASE("fmap round trip is bit exact") {
  std::mt19937_64 rng(7);
  auto fm = random_map(rng, 4, 4, 8);
  fm.data[3] = -0.0f;
  fm.data[5] = std::numeric_limits<float>::denorm_min();
  const auto bytes = encode_feature_map(fm);
  CHECK(bytes.size() == 24 + 4 * 4 * 8 * 4);
  const auto back = decode_feature_map(bytes);
  REQUIRE(back.data.size() == fm.data.size());
  CHECK(std::memcmp(back.data.data(), fm.data.data(), fm.data.size() * 4) == 0);
  CHECK(encode_feature_map(back) == bytes);

  const auto dir = testsupport::scratch_dir("fmap_rt");
  write_feature_map(fm, dir / "frame_07.fmap");
  const auto read = read_feature_map(dir / "frame_07.fmap");
  CHECK(read.source_id == "frame_07");
  CHECK(encode_feature_map(read) == bytes);
}

TEST_CASE("fmap header is little endian") {
  FeatureMap fm;
  fm.height = 2;
  fm.width = 3;
  fm.channels = 1;
  fm.data.assign(6, 1.0f);
  const auto b = encode_feature_map(fm);
  CHECK(std::string(b.begin(), b.begin() + 4) == "FMAP");
  CHECK(b[4] == 1);
  CHECK(b[8] == 2);
  CHECK(b[12] == 3);
  CHECK(b[16] == 1);
  CHECK(b[20] == 0);
  // 1.0f = 0x3f800000
  CHECK(b[24] == 0x00);
  CHECK(b[27] == 0x3f);
}

TEST_CASE("writing to an unwritable path fails with IoError") {
  FeatureMap fm;
  fm.height = fm.width = 2;
  fm.channels = 1;
  fm.data.assign(4, 1.0f);
  CHECK_THROWS_AS(write_feature_map(fm, "/nonexistent_dir_xyz/a.fmap"), IoError);
  CHECK_THROWS_AS(read_feature_map("/nonexistent_dir_xyz/a.fmap"), IoError);
}

TEST_CASE("mask pgm round trips") {
  const auto dir = testsupport::scratch_dir("mask_rt");
  SUBCASE("8 bit") {
    const LabelMask m(2, 2, {0, 1, 1, 0});
    const auto pgm = mask_to_pgm(m);
    CHECK(pgm.maxval == 255);
    const auto bytes = encode_pgm(pgm);
    CHECK(std::string(bytes.begin(), bytes.begin() + 11) == "P5\n2 2\n255\n");
    CHECK(bytes.size() == 11 + 4);
    write_mask(m, dir / "m.pgm");
    CHECK(read_mask(dir / "m.pgm") == m);
  }
  SUBCASE("16 bit") {
    const LabelMask m(1, 3, {0, 300, 65535});
    CHECK(mask_to_pgm(m).maxval == 65535);
    const auto bytes = encode_pgm(mask_to_pgm(m));
    // 300 = 0x012c, big-endian
    const std::size_t header = std::string("P5\n3 1\n65535\n").size();
    CHECK(bytes[header + 2] == 0x01);
    CHECK(bytes[header + 3] == 0x2c);
    write_mask(m, dir / "m16.pgm");
    CHECK(read_mask(dir / "m16.pgm") == m);
  }
}

TEST_CASE("pgm reader") {
  SUBCASE("ascii variant rejected") {
    CHECK_THROWS_AS(decode_pgm(bytes_of("P2\n2 1\n255\n0 1\n")), FormatError);
    CHECK_THROWS_AS(decode_pgm(bytes_of("P3\n1 1\n255\n0 0 0\n")), FormatError);
  }
  SUBCASE("comments in header") {
    auto b = bytes_of("P5\n# made by hand\n2 1 # dims\n255\n");
    b.push_back(4);
    b.push_back(9);
    const auto img = decode_pgm(b);
    CHECK(img.width == 2);
    CHECK(img.samples == std::vector<std::uint16_t>{4, 9});
  }
  SUBCASE("sample above maxval") {
    auto b = bytes_of("P5\n1 1\n3\n");
    b.push_back(4);
    CHECK_THROWS_AS(decode_pgm(b), FormatError);
  }
  SUBCASE("short raster") {
    auto b = bytes_of("P5\n2 2\n255\n");
    b.push_back(0);
    CHECK_THROWS_AS(decode_pgm(b), TruncationError);
  }
  SUBCASE("bad maxval") {
    CHECK_THROWS_AS(decode_pgm(bytes_of("P5\n1 1\n0\n\x01")), FormatError);
    CHECK_THROWS_AS(decode_pgm(bytes_of("P5\n1 1\n70000\n\x01\x01")), FormatError);
  }
}

TEST_CASE("saliency is written as 16 bit") {
  SaliencyMap s{1, 3, {0.0, 0.5, 1.0}};
  const auto img = saliency_to_pgm(s);
  CHECK(img.maxval == 65535);
  CHECK(img.samples == std::vector<std::uint16_t>{0, 32768, 65535});
  s.values[1] = 1.5;
  CHECK_THROWS_AS(saliency_to_pgm(s), DataError);
}

TEST_CASE("eigenvector images") {
  const std::vector<double> endpoints{0.0, 1.0};
  CHECK(eigenvector_image(endpoints, 1, 2).samples == std::vector<std::uint16_t>{0, 65535});

  const std::vector<double> flat(6, 0.4);
  const auto img = eigenvector_image(flat, 2, 3);
  CHECK(std::all_of(img.samples.begin(), img.samples.end(), [](auto v) { return v == 0; }));

  const std::vector<double> with_nan{0.0, std::nan(""), 1.0, 2.0};
  CHECK_THROWS_AS(eigenvector_image(with_nan, 2, 2), DataError);
  CHECK_THROWS_AS(eigenvector_image(endpoints, 2, 2), ShapeError);
}

TEST_CASE("min-max normalization") {
  const std::vector<double> v{-2.0, 0.0, 2.0};
  CHECK(min_max_normalize(v) == std::vector<double>{0.0, 0.5, 1.0});
  const std::vector<double> c{3.0, 3.0};
  CHECK(min_max_normalize(c) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("label mask basics") {
  const LabelMask m(2, 3, {4, 4, 0, 7, 0, 4});
  CHECK(m.max_label() == 7);
  CHECK(m.distinct_labels() == std::vector<std::uint16_t>{0, 4, 7});
  CHECK(m.num_labels() == 3);
  CHECK(m.at(1, 0) == 7);
  CHECK_THROWS_AS(LabelMask(2, 2, std::vector<std::uint16_t>{1, 2, 3}), ArgumentError);
}
