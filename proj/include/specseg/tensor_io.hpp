#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace specseg {

/// Dense h x w x d feature tensor, row-major (row, col, channel).
///
/// The flattened view treats pixel i = row * width + col as a node whose
/// feature vector is the `channels` floats starting at i * channels.
struct FeatureMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;
  std::string source_id;

  std::size_t num_pixels() const { return std::size_t{height} * width; }

  std::span<const float> pixel(std::size_t i) const {
    return std::span<const float>(data).subspan(i * channels, channels);
  }

  /// Throws ArgumentError on bad dims / length, DataError on non-finite values.
  void validate() const;
};

/// Integer-labeled segmentation grid.
struct LabelMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint16_t> labels;

  LabelMask() = default;
  LabelMask(std::uint32_t h, std::uint32_t w, std::uint16_t fill = 0)
      : height(h), width(w), labels(std::size_t{h} * w, fill) {}
  LabelMask(std::uint32_t h, std::uint32_t w, std::vector<std::uint16_t> l);

  std::size_t size() const { return labels.size(); }
  std::uint16_t at(std::uint32_t row, std::uint32_t col) const {
    return labels[std::size_t{row} * width + col];
  }
  std::uint16_t max_label() const;
  /// Sorted distinct labels present.
  std::vector<std::uint16_t> distinct_labels() const;
  std::size_t num_labels() const { return distinct_labels().size(); }

  bool operator==(const LabelMask&) const = default;
};

/// Per-pixel values in [0, 1]; min 0 and max 1 unless constant (all zero).
struct SaliencyMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> values;
};

/// Min-max normalization to [0, 1]. A constant input maps to all zeros.
/// Throws DataError on non-finite input.
std::vector<double> min_max_normalize(std::span<const double> v);

// FMAP (little-endian): "FMAP", u32 version=1, u32 h, u32 w, u32 d,
// u32 dtype (0 = binary32), then h*w*d floats.
inline constexpr std::uint32_t kFmapVersion = 1;
inline constexpr std::uint32_t kFmapDtypeF32 = 0;
inline constexpr std::size_t kFmapHeaderBytes = 24;

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& fm);
FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes,
                              std::string source_id = {});

/// source_id is taken from the file stem.
FeatureMap read_feature_map(const std::filesystem::path& path);
void write_feature_map(const FeatureMap& fm, const std::filesystem::path& path);

/// Raw binary PGM (P5) image. Samples wider than 8 bits are stored
/// big-endian on disk.
struct PgmImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint16_t maxval = 255;
  std::vector<std::uint16_t> samples;
};

std::vector<std::uint8_t> encode_pgm(const PgmImage& img);
PgmImage decode_pgm(std::span<const std::uint8_t> bytes);
PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const PgmImage& img, const std::filesystem::path& path);

/// Masks use maxval 255 when every label fits in 8 bits, 65535 otherwise.
PgmImage mask_to_pgm(const LabelMask& mask);
LabelMask pgm_to_mask(const PgmImage& img);
LabelMask read_mask(const std::filesystem::path& path);
void write_mask(const LabelMask& mask, const std::filesystem::path& path);

/// 16-bit PGM, value v stored as round(v * 65535).
PgmImage saliency_to_pgm(const SaliencyMap& map);
void write_saliency(const SaliencyMap& map, const std::filesystem::path& path);

/// Min-max normalized 16-bit grayscale rendering of a per-pixel vector.
PgmImage eigenvector_image(std::span<const double> v, std::uint32_t height,
                           std::uint32_t width);
void export_eigenvector_image(std::span<const double> v, std::uint32_t height,
                              std::uint32_t width,
                              const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(std::span<const std::uint8_t> bytes,
                      const std::filesystem::path& path);

}  // namespace specseg
