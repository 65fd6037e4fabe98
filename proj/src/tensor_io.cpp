#include "specseg/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "specseg/error.hpp"

namespace specseg {

namespace {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> b, std::size_t off) {
  return std::uint32_t{b[off]} | (std::uint32_t{b[off + 1]} << 8) |
         (std::uint32_t{b[off + 2]} << 16) | (std::uint32_t{b[off + 3]} << 24);
}

bool is_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Minimal cursor over a PGM header: tokens separated by whitespace, '#'
// comments running to end of line.
class HeaderCursor {
 public:
  explicit HeaderCursor(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' &&
               bytes_[pos_] != '\r')
          ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::uint32_t number(const char* field) {
    skip_space_and_comments();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > std::numeric_limits<std::uint32_t>::max())
        throw FormatError(std::string("PGM ") + field + " out of range");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw FormatError(std::string("PGM missing ") + field);
    return static_cast<std::uint32_t>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_]))
      throw FormatError("PGM header not terminated by whitespace");
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void FeatureMap::validate() const {
  if (height < 2 || width < 2 || channels < 1)
    throw ArgumentError("feature map needs h >= 2, w >= 2, d >= 1");
  if (data.size() != std::size_t{height} * width * channels)
    throw ArgumentError("feature map data length does not match h*w*d");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i]))
      throw DataError("non-finite feature value at flat index " +
                      std::to_string(i));
}

LabelMask::LabelMask(std::uint32_t h, std::uint32_t w,
                     std::vector<std::uint16_t> l)
    : height(h), width(w), labels(std::move(l)) {
  if (labels.size() != std::size_t{h} * w)
    throw ArgumentError("label count does not match height*width");
}

std::uint16_t LabelMask::max_label() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

std::vector<std::uint16_t> LabelMask::distinct_labels() const {
  std::vector<bool> seen(std::size_t{max_label()} + 1, false);
  for (auto l : labels) seen[l] = true;
  std::vector<std::uint16_t> out;
  for (std::size_t l = 0; l < seen.size(); ++l)
    if (seen[l]) out.push_back(static_cast<std::uint16_t>(l));
  return out;
}

std::vector<double> min_max_normalize(std::span<const double> v) {
  if (v.empty()) return {};
  for (double x : v)
    if (!std::isfinite(x)) throw DataError("non-finite value in vector");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  const double range = *hi - *lo;
  if (range > 0.0)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& fm) {
  fm.validate();
  std::vector<std::uint8_t> out;
  out.reserve(kFmapHeaderBytes + fm.data.size() * 4);
  for (char c : std::string_view("FMAP")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32_le(out, kFmapVersion);
  put_u32_le(out, fm.height);
  put_u32_le(out, fm.width);
  put_u32_le(out, fm.channels);
  put_u32_le(out, kFmapDtypeF32);
  for (float f : fm.data) put_u32_le(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes,
                              std::string source_id) {
  if (bytes.size() < kFmapHeaderBytes)
    throw FormatError("FMAP header truncated");
  if (bytes[0] != 'F' || bytes[1] != 'M' || bytes[2] != 'A' || bytes[3] != 'P')
    throw FormatError("bad FMAP magic");
  if (get_u32_le(bytes, 4) != kFmapVersion)
    throw FormatError("unsupported FMAP version " +
                      std::to_string(get_u32_le(bytes, 4)));
  FeatureMap fm;
  fm.height = get_u32_le(bytes, 8);
  fm.width = get_u32_le(bytes, 12);
  fm.channels = get_u32_le(bytes, 16);
  if (get_u32_le(bytes, 20) != kFmapDtypeF32)
    throw FormatError("unsupported FMAP dtype code " +
                      std::to_string(get_u32_le(bytes, 20)));
  if (fm.height < 2 || fm.width < 2 || fm.channels < 1)
    throw FormatError("FMAP dims must satisfy h >= 2, w >= 2, d >= 1");

  const std::uint64_t count =
      std::uint64_t{fm.height} * fm.width * std::uint64_t{fm.channels};
  const std::uint64_t payload = bytes.size() - kFmapHeaderBytes;
  if (count > payload / 4 || payload != count * 4)
    throw TruncationError("FMAP declares " + std::to_string(count) +
                          " floats but payload holds " +
                          std::to_string(payload) + " bytes");

  fm.data.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    fm.data[i] = std::bit_cast<float>(get_u32_le(bytes, kFmapHeaderBytes + 4 * i));
  fm.source_id = std::move(source_id);
  fm.validate();
  return fm;
}

FeatureMap read_feature_map(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_feature_map(bytes, path.stem().string());
}

void write_feature_map(const FeatureMap& fm, const std::filesystem::path& path) {
  write_file_bytes(encode_feature_map(fm), path);
}

std::vector<std::uint8_t> encode_pgm(const PgmImage& img) {
  if (img.width == 0 || img.height == 0 || img.maxval == 0)
    throw ArgumentError("PGM needs positive width, height and maxval");
  if (img.samples.size() != std::size_t{img.width} * img.height)
    throw ArgumentError("PGM sample count does not match width*height");
  std::ostringstream header;
  header << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
  const std::string h = header.str();
  const bool wide = img.maxval > 255;
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(h.size() + img.samples.size() * (wide ? 2 : 1));
  for (auto s : img.samples) {
    if (s > img.maxval) throw FormatError("PGM sample exceeds maxval");
    if (wide) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return out;
}

PgmImage decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P')
    throw FormatError("not a PGM file");
  if (bytes[1] != '5')
    throw FormatError(std::string("unsupported PNM variant P") +
                      static_cast<char>(bytes[1]) + " (only P5)");
  HeaderCursor cur(bytes.subspan(2));
  // Magic must be followed by whitespace or a comment.
  if (bytes.size() < 3 || !(is_space(bytes[2]) || bytes[2] == '#'))
    throw FormatError("malformed PGM magic");

  PgmImage img;
  img.width = cur.number("width");
  img.height = cur.number("height");
  const auto maxval = cur.number("maxval");
  cur.single_space();
  if (img.width == 0 || img.height == 0)
    throw FormatError("PGM width and height must be positive");
  if (maxval == 0 || maxval > 65535)
    throw FormatError("PGM maxval must be in [1, 65535]");
  img.maxval = static_cast<std::uint16_t>(maxval);

  const std::size_t start = 2 + cur.pos();
  const std::uint64_t n = std::uint64_t{img.width} * img.height;
  const std::uint64_t bps = maxval > 255 ? 2 : 1;
  const std::uint64_t payload = bytes.size() - start;
  if (n > payload / bps || payload != n * bps)
    throw TruncationError("PGM raster size does not match header");

  img.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint16_t s = bps == 2
        ? static_cast<std::uint16_t>((bytes[start + 2 * i] << 8) |
                                     bytes[start + 2 * i + 1])
        : bytes[start + i];
    if (s > img.maxval) throw FormatError("PGM sample exceeds maxval");
    img.samples[i] = s;
  }
  return img;
}

PgmImage read_pgm(const std::filesystem::path& path) {
  return decode_pgm(read_file_bytes(path));
}

void write_pgm(const PgmImage& img, const std::filesystem::path& path) {
  write_file_bytes(encode_pgm(img), path);
}

PgmImage mask_to_pgm(const LabelMask& mask) {
  if (mask.labels.size() != std::size_t{mask.height} * mask.width)
    throw ArgumentError("mask label count does not match height*width");
  PgmImage img;
  img.width = mask.width;
  img.height = mask.height;
  img.maxval = mask.max_label() <= 255 ? 255 : 65535;
  img.samples = mask.labels;
  return img;
}

LabelMask pgm_to_mask(const PgmImage& img) {
  return LabelMask(img.height, img.width, img.samples);
}

LabelMask read_mask(const std::filesystem::path& path) {
  return pgm_to_mask(read_pgm(path));
}

void write_mask(const LabelMask& mask, const std::filesystem::path& path) {
  write_pgm(mask_to_pgm(mask), path);
}

PgmImage saliency_to_pgm(const SaliencyMap& map) {
  if (map.values.size() != std::size_t{map.height} * map.width)
    throw ArgumentError("saliency value count does not match height*width");
  PgmImage img;
  img.width = map.width;
  img.height = map.height;
  img.maxval = 65535;
  img.samples.reserve(map.values.size());
  for (double v : map.values) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw DataError("saliency value outside [0, 1]");
    img.samples.push_back(static_cast<std::uint16_t>(std::lround(v * 65535.0)));
  }
  return img;
}

void write_saliency(const SaliencyMap& map, const std::filesystem::path& path) {
  write_pgm(saliency_to_pgm(map), path);
}

PgmImage eigenvector_image(std::span<const double> v, std::uint32_t height,
                           std::uint32_t width) {
  if (v.size() != std::size_t{height} * width)
    throw ShapeError("eigenvector length " + std::to_string(v.size()) +
                     " does not match grid " + std::to_string(height) + "x" +
                     std::to_string(width));
  SaliencyMap m{height, width, min_max_normalize(v)};
  return saliency_to_pgm(m);
}

void export_eigenvector_image(std::span<const double> v, std::uint32_t height,
                              std::uint32_t width,
                              const std::filesystem::path& path) {
  write_pgm(eigenvector_image(v, height, width), path);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(std::span<const std::uint8_t> bytes,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace specseg
