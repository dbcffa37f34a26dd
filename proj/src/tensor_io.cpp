#include "stgcn/tensor_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "stgcn/errors.hpp"

namespace stgcn {

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
}

void Reader::need(std::size_t n, const char* what) {
    if (remaining() < n) {
        throw FormatError(origin_ + ": truncated while reading " + what + " at byte " +
                          std::to_string(pos_) + " (" + std::to_string(remaining()) +
                          " bytes left, " + std::to_string(n) + " needed)");
    }
}

std::uint32_t Reader::u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() {
    need(8, "f64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
}

std::string Reader::bytes(std::size_t n) {
    need(n, "byte block");
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
}

}  // namespace le

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::uint8_t> encode_tensor(const SkeletonClip& clip) {
    const std::size_t n = static_cast<std::size_t>(clip.persons) * clip.channels * clip.frames * clip.joints;
    if (clip.data.size() != n) {
        throw DimensionError("encode_tensor: clip '" + clip.id + "' holds " +
                             std::to_string(clip.data.size()) + " values, shape implies " +
                             std::to_string(n));
    }
    std::vector<std::uint8_t> out;
    out.reserve(24 + 4 * n);
    for (char ch : {'S', 'T', 'G', 'T'}) out.push_back(static_cast<std::uint8_t>(ch));
    le::put_u32(out, kTensorFormatVersion);
    le::put_u32(out, static_cast<std::uint32_t>(clip.persons));
    le::put_u32(out, static_cast<std::uint32_t>(clip.channels));
    le::put_u32(out, static_cast<std::uint32_t>(clip.frames));
    le::put_u32(out, static_cast<std::uint32_t>(clip.joints));
    for (float v : clip.data) le::put_f32(out, v);
    return out;
}

SkeletonClip decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    le::Reader rd(bytes, origin);
    if (bytes.size() < 4 || rd.bytes(4) != "STGT") throw FormatError(origin + ": bad magic, expected STGT");
    const auto version = rd.u32();
    if (version != kTensorFormatVersion) {
        throw FormatError(origin + ": unsupported tensor version " + std::to_string(version));
    }
    const auto m = rd.u32();
    const auto c = rd.u32();
    const auto t = rd.u32();
    const auto v = rd.u32();
    if (m == 0 || c != static_cast<std::uint32_t>(kChannels) || t == 0 ||
        v != static_cast<std::uint32_t>(kNumJoints)) {
        throw FormatError(origin + ": unsupported shape (" + std::to_string(m) + ", " +
                          std::to_string(c) + ", " + std::to_string(t) + ", " + std::to_string(v) + ")");
    }
    const std::uint64_t n = std::uint64_t{m} * c * t * v;
    if (rd.remaining() < n * 4) {
        throw FormatError(origin + ": truncated payload, " + std::to_string(rd.remaining() / 4) +
                          " values present, shape requires " + std::to_string(n));
    }
    if (rd.remaining() > n * 4) {
        throw FormatError(origin + ": " + std::to_string(rd.remaining() - n * 4) +
                          " trailing bytes after payload");
    }
    SkeletonClip clip = SkeletonClip::zeros(static_cast<int>(m), static_cast<int>(t), static_cast<int>(c),
                                            static_cast<int>(v));
    for (auto& x : clip.data) x = rd.f32();
    clip.source_frame_count = static_cast<int>(t);
    return clip;
}

void export_tensor(const SkeletonClip& clip, const std::string& path) {
    write_file(path, encode_tensor(clip));
}

SkeletonClip import_tensor(const std::string& path) { return decode_tensor(read_file(path), path); }

}  // namespace stgcn
