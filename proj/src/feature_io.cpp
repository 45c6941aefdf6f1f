#include "ncd/feature_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ncd/error.hpp"

namespace ncd {
namespace {

using Kind = FormatError::Kind;

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

private:
    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(Kind::Truncated, std::string("truncated payload while reading ") + what + " at byte " +
                                                   std::to_string(pos_));
        }
    }
    std::uint8_t u8() { return bytes_[pos_++]; }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::string magic_string(const Magic& m) { return std::string(m.begin(), m.end()); }

void check_record(const FeatureRecord& r, std::size_t index, std::uint32_t dim) {
    const std::string where = "record " + std::to_string(index);
    if (r.feature.size() != static_cast<Eigen::Index>(dim)) {
        throw DomainError(where + ": feature dimension " + std::to_string(r.feature.size()) + " differs from " +
                          std::to_string(dim));
    }
    if (!r.box.valid()) throw DomainError(where + ": invalid box");
    if (!r.feature.allFinite()) throw DomainError(where + ": non-finite feature");
    if (r.source == Source::GT && !r.gt_class) throw DomainError(where + ": GT record without gt_class");
    if (r.objectness && !std::isfinite(*r.objectness)) throw DomainError(where + ": non-finite objectness");
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(Kind::Io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(Kind::Io, "write failed for '" + path.string() + "'");
}

}  // namespace

std::vector<std::uint8_t> encode_feature_file(std::span<const FeatureRecord> records, std::uint32_t dim,
                                              const Magic& magic) {
    for (std::size_t i = 0; i < records.size(); ++i) check_record(records[i], i, dim);

    std::vector<std::uint8_t> bytes;
    bytes.reserve(kHeaderSize + records.size() * record_size(dim));
    ByteWriter w(bytes);
    for (char c : magic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(kFormatVersion);
    w.u32(dim);
    w.u64(records.size());
    for (const auto& r : records) {
        w.u64(r.image_id);
        w.f32(r.box.x);
        w.f32(r.box.y);
        w.f32(r.box.w);
        w.f32(r.box.h);
        w.u8(static_cast<std::uint8_t>(r.source));
        w.u8(r.base_pred ? 1 : 0);
        w.u32(r.base_pred ? r.base_pred->code() : 0);
        w.u8(r.objectness ? 1 : 0);
        w.f32(r.objectness.value_or(0.0));
        w.u8(r.gt_class ? 1 : 0);
        w.u32(r.gt_class ? static_cast<std::uint32_t>(*r.gt_class) : 0);
        for (Eigen::Index k = 0; k < r.feature.size(); ++k) w.f32(r.feature(k));
    }
    return bytes;
}

FeatureFile decode_feature_file(std::span<const std::uint8_t> bytes, const Magic& magic) {
    ByteReader rd(bytes);
    rd.need(4, "magic");
    Magic got{};
    for (auto& c : got) c = static_cast<char>(rd.u8());
    if (got != magic) {
        throw FormatError(Kind::BadMagic, "bad magic: expected '" + magic_string(magic) + "', found '" +
                                              magic_string(got) + "'");
    }
    rd.need(1, "version");
    const std::uint8_t version = rd.u8();
    if (version != kFormatVersion) {
        throw FormatError(Kind::BadVersion, "unsupported format version " + std::to_string(version) +
                                                " (expected " + std::to_string(kFormatVersion) + ")");
    }
    rd.need(12, "header");
    FeatureFile file;
    file.dim = rd.u32();
    const std::uint64_t count = rd.u64();
    const std::size_t rsize = record_size(file.dim);
    if (count > rd.remaining() / rsize) {
        throw FormatError(Kind::Truncated, "truncated payload: header declares " + std::to_string(count) +
                                               " records but only " + std::to_string(rd.remaining() / rsize) +
                                               " fit");
    }
    if (rd.remaining() != count * rsize) {
        throw FormatError(Kind::Invalid, std::to_string(rd.remaining() - count * rsize) +
                                             " trailing bytes after declared records");
    }

    file.records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::string where = "record " + std::to_string(i);
        FeatureRecord r;
        r.image_id = rd.u64();
        const float box[4] = {rd.f32(), rd.f32(), rd.f32(), rd.f32()};
        for (float v : box) {
            if (!std::isfinite(v)) throw FormatError(Kind::NonFinite, where + ": non-finite box coordinate");
        }
        r.box = {box[0], box[1], box[2], box[3]};
        if (!r.box.valid()) throw FormatError(Kind::Invalid, where + ": box with non-positive extent");

        const std::uint8_t source = rd.u8();
        if (source > 1) throw FormatError(Kind::Invalid, where + ": unknown source " + std::to_string(source));
        r.source = static_cast<Source>(source);

        const std::uint8_t bp_flag = rd.u8();
        const std::uint32_t bp = rd.u32();
        const std::uint8_t obj_flag = rd.u8();
        const float obj = rd.f32();
        const std::uint8_t gt_flag = rd.u8();
        const std::uint32_t gt = rd.u32();
        if (bp_flag > 1 || obj_flag > 1 || gt_flag > 1) throw FormatError(Kind::Invalid, where + ": bad presence flag");
        if (bp_flag) r.base_pred = BasePrediction::from_code(bp);
        if (obj_flag) {
            if (!std::isfinite(obj)) throw FormatError(Kind::NonFinite, where + ": non-finite objectness");
            r.objectness = obj;
        }
        if (gt_flag) r.gt_class = static_cast<ClassId>(gt);
        if (r.source == Source::GT && !r.gt_class) {
            throw FormatError(Kind::Invalid, where + ": GT record without gt_class");
        }

        r.feature.resize(file.dim);
        for (std::uint32_t k = 0; k < file.dim; ++k) {
            const float v = rd.f32();
            if (!std::isfinite(v)) {
                throw FormatError(Kind::NonFinite, where + ": non-finite feature entry " + std::to_string(k));
            }
            r.feature(k) = v;
        }
        file.records.push_back(std::move(r));
    }
    return file;
}

void write_feature_file(const std::filesystem::path& path, std::span<const FeatureRecord> records,
                        const Magic& magic) {
    const auto dim = records.empty() ? 0u : static_cast<std::uint32_t>(records.front().feature.size());
    write_feature_file(path, records, dim, magic);
}

void write_feature_file(const std::filesystem::path& path, std::span<const FeatureRecord> records,
                        std::uint32_t dim, const Magic& magic) {
    write_bytes(path, encode_feature_file(records, dim, magic));
}

FeatureFile read_feature_file(const std::filesystem::path& path, const Magic& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open feature file '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_feature_file(bytes, magic);
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), path.string() + ": " + e.what());
    }
}

}  // namespace ncd
