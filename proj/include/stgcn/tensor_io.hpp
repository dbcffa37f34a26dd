#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stgcn/pipeline.hpp"

namespace stgcn {

// Clip tensor file: "STGT", u32 LE version=1, M, C, T, V, then M*C*T*V
// little-endian f32 values with M outermost and V innermost.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const SkeletonClip& clip);
// `id` and `label` are not stored in the file; callers set them from the
// manifest. source_frame_count is set to T.
SkeletonClip decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");

void export_tensor(const SkeletonClip& clip, const std::string& path);
SkeletonClip import_tensor(const std::string& path);

namespace le {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);

// Bounds-checked little-endian reader.
class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::string origin)
        : bytes_(bytes), origin_(std::move(origin)) {}

    std::uint32_t u32();
    float f32();
    double f64();
    std::string bytes(std::size_t n);
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
    [[nodiscard]] const std::string& origin() const { return origin_; }

private:
    void need(std::size_t n, const char* what);

    const std::vector<std::uint8_t>& bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace le

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace stgcn
