// SPDX-License-Identifier: Apache-2.0
//
// SVT: portable video-tensor file.
//   magic   "SVT1" (4 bytes)
//   header  4 x uint32 little-endian: L, H, W, C
//   payload 4*L*H*W*C bytes of little-endian float32, row-major (L,H,W,C)
// Byte order is fixed little-endian regardless of host; round trips are
// bit-exact.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "../core/tensor.hpp"
#include "../errors.hpp"

namespace vsr {

namespace detail {

inline void put_u32_le(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32_le(std::istream& is, uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
        (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

inline void put_f32_le(std::ostream& os, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32_le(os, v);
}

inline bool get_f32_le(std::istream& is, float& f) {
    uint32_t v;
    if (!get_u32_le(is, v)) return false;
    std::memcpy(&f, &v, 4);
    return true;
}

}  // namespace detail

inline void write_svt(std::ostream& os, const Tensor& video) {
    require_rank(video, 4, "write_svt");
    os.write("SVT1", 4);
    for (int i = 0; i < 4; ++i) detail::put_u32_le(os, static_cast<uint32_t>(video.shape[i]));
    for (float v : video.data) detail::put_f32_le(os, v);
    if (!os) throw IoError("write_svt: stream write failed");
}

inline void write_svt(const std::string& path, const Tensor& video) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_svt: cannot open '" + path + "' for writing");
    write_svt(f, video);
    if (!f) throw IoError("write_svt: write to '" + path + "' failed");
}

// Reads one SVT blob from the stream. When trailing_check is true the
// stream must be exhausted afterwards (standalone .svt file).
inline Tensor read_svt(std::istream& is, const std::string& what, bool trailing_check) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "SVT1", 4) != 0)
        throw IoError("read_svt: bad magic in " + what);
    uint32_t dims[4];
    for (auto& d : dims)
        if (!detail::get_u32_le(is, d)) throw IoError("read_svt: header truncated in " + what);
    for (auto d : dims)
        if (d == 0) throw IoError("read_svt: zero dimension in header of " + what);
    Tensor video({static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]),
                  static_cast<int>(dims[3])});
    for (auto& v : video.data)
        if (!detail::get_f32_le(is, v)) throw IoError("read_svt: payload short in " + what);
    if (trailing_check) {
        char extra;
        if (is.read(&extra, 1)) throw IoError("read_svt: payload size mismatch (trailing bytes) in " + what);
    }
    return video;
}

inline Tensor read_svt(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_svt: cannot open '" + path + "'");
    return read_svt(f, "'" + path + "'", /*trailing_check=*/true);
}

}  // namespace vsr
