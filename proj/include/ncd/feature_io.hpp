#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ncd/types.hpp"

namespace ncd {

// Binary container layout (little-endian throughout):
//   magic[4] | u8 version | u32 dim | u64 count | count * record
//   record = u64 image_id | f32 x,y,w,h | u8 source
//          | u8 base_pred_flag | u32 base_pred | u8 objectness_flag | f32 objectness
//          | u8 gt_flag | u32 gt_class | dim * f32 feature
// Absent optionals store a zero flag and zero payload. base_pred 0xFFFFFFFF is Background.

using Magic = std::array<char, 4>;

inline constexpr Magic kFeatureMagic{'N', 'C', 'D', 'F'};
inline constexpr Magic kEmbeddingMagic{'N', 'C', 'D', 'E'};
inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderSize = 4 + 1 + 4 + 8;
inline constexpr std::size_t kRecordFixedSize = 8 + 16 + 1 + 5 + 5 + 5;

constexpr std::size_t record_size(std::size_t dim) { return kRecordFixedSize + 4 * dim; }

struct FeatureFile {
    std::uint32_t dim = 0;
    std::vector<FeatureRecord> records;
};

std::vector<std::uint8_t> encode_feature_file(std::span<const FeatureRecord> records, std::uint32_t dim,
                                              const Magic& magic = kFeatureMagic);
FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes, const Magic& magic = kFeatureMagic);

/// Dimension is taken from the first record (0 for an empty list). Mixed dimensions throw before any write.
void write_feature_file(const std::filesystem::path& path, std::span<const FeatureRecord> records,
                        const Magic& magic = kFeatureMagic);
/// Variant that pins the header dimension, so empty files can still carry it.
void write_feature_file(const std::filesystem::path& path, std::span<const FeatureRecord> records,
                        std::uint32_t dim, const Magic& magic = kFeatureMagic);

FeatureFile read_feature_file(const std::filesystem::path& path, const Magic& magic = kFeatureMagic);

}  // namespace ncd
