#pragma once

// Binary pyramid file, little-endian:
//   "PACL" | u32 version (=1) | u32 level count
//   per level, coarse -> fine:
//     u32 h | u32 w | u32 c | h*w*c f32 features | h*w f32 V | h*w f32 O

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cvl/pyramid.hpp"

namespace cvl {

inline constexpr std::array<char, 4> kPyramidMagic{'P', 'A', 'C', 'L'};
inline constexpr std::uint32_t kPyramidVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_grid(std::vector<unsigned char>& out, const Grid& g) {
  for (float f : g.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }

  void need(std::uint64_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, pos_);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  void floats(Grid& g, const char* what) {
    need(static_cast<std::uint64_t>(g.size()) * 4, what);
    for (float& f : g.data()) f = std::bit_cast<float>(u32(what));
  }

  const unsigned char* cursor() const { return bytes_.data() + pos_; }
  void skip(std::uint64_t n) { pos_ += n; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::uint64_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_pyramid(const FeaturePyramid& pyr) {
  std::vector<unsigned char> out(kPyramidMagic.begin(), kPyramidMagic.end());
  detail::put_u32(out, kPyramidVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(pyr.levels.size()));
  for (const PyramidLevel& lv : pyr.levels) {
    detail::put_u32(out, static_cast<std::uint32_t>(lv.height()));
    detail::put_u32(out, static_cast<std::uint32_t>(lv.width()));
    detail::put_u32(out, static_cast<std::uint32_t>(lv.channels()));
    detail::put_grid(out, lv.features);
    detail::put_grid(out, lv.view_consistent);
    detail::put_grid(out, lv.on_ground);
  }
  return out;
}

inline FeaturePyramid decode_pyramid(const std::vector<unsigned char>& bytes) {
  detail::ByteReader in(bytes);
  in.need(4, "magic");
  if (std::memcmp(in.cursor(), kPyramidMagic.data(), 4) != 0) throw FormatError("bad magic", 0);
  in.skip(4);
  const std::uint64_t version_at = in.offset();
  if (in.u32("version") != kPyramidVersion) throw FormatError("unsupported version", version_at);
  const std::uint64_t count_at = in.offset();
  const std::uint32_t count = in.u32("level count");
  if (count == 0) throw FormatError("zero levels", count_at);

  FeaturePyramid pyr;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint64_t header_at = in.offset();
    const std::uint32_t h = in.u32("level height");
    const std::uint32_t w = in.u32("level width");
    const std::uint32_t c = in.u32("level channels");
    if (h == 0 || w == 0 || c == 0) throw FormatError("empty level shape", header_at);
    const std::uint64_t payload = (static_cast<std::uint64_t>(h) * w * c + 2ull * h * w) * 4;
    in.need(payload, "level payload");
    PyramidLevel lv{Grid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c)),
                    Grid(static_cast<int>(h), static_cast<int>(w), 1),
                    Grid(static_cast<int>(h), static_cast<int>(w), 1)};
    in.floats(lv.features, "features");
    in.floats(lv.view_consistent, "view-consistent confidence");
    in.floats(lv.on_ground, "on-ground confidence");
    pyr.levels.push_back(std::move(lv));
  }
  if (in.offset() != bytes.size()) throw FormatError("trailing bytes", in.offset());
  return pyr;
}

inline void write_pyramid(const FeaturePyramid& pyr, const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = encode_pyramid(pyr);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("failed writing " + path.string());
}

inline FeaturePyramid read_pyramid(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                         std::istreambuf_iterator<char>());
  return decode_pyramid(bytes);
}

}  // namespace cvl
