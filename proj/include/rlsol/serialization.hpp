#pragma once

// Binary fixture container for feature maps and weighted samples.
//
//   FeatureMap:     "RLFM" u32 c, u32 h, u32 w, f64[c*h*w]
//   WeightedSample: "RLWS" u32 c, u32 h, u32 w, u32 oh, u32 ow,
//                   f64[c*h*w] features, f64[oh*ow] target, f64[oh*ow] gamma
//
// Integers are little-endian 32-bit, payload values little-endian IEEE 754
// binary64, in (channel, row, col) / row-major order.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "rlsol/conv.hpp"
#include "rlsol/errors.hpp"

namespace rlsol {

inline constexpr std::array<char, 4> kFeatureMapMagic{'R', 'L', 'F', 'M'};
inline constexpr std::array<char, 4> kWeightedSampleMagic{'R', 'L', 'W', 'S'};

namespace detail {

inline void put_u32(std::ostream& out, std::size_t value) {
  if (value > std::numeric_limits<std::uint32_t>::max()) throw InputError("dimension does not fit in 32 bits");
  const auto v = static_cast<std::uint32_t>(value);
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline void put_f64(std::ostream& out, double value) {
  const auto v = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

inline void read_exact(std::istream& in, char* buf, std::size_t n) {
  in.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw InputError("truncated fixture container");
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline double get_f64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return std::bit_cast<double>(v);
}

inline void expect_magic(std::istream& in, const std::array<char, 4>& magic) {
  std::array<char, 4> got{};
  read_exact(in, got.data(), 4);
  if (got != magic)
    throw InputError("bad container magic: expected '" + std::string(magic.begin(), magic.end()) + "'");
}

inline void put_values(std::ostream& out, std::span<const double> values) {
  for (double v : values) put_f64(out, v);
}

inline std::vector<double> get_values(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = get_f64(in);
  return v;
}

}  // namespace detail

inline void write_feature_map(std::ostream& out, const FeatureMap& fm) {
  out.write(kFeatureMapMagic.data(), 4);
  detail::put_u32(out, fm.channels);
  detail::put_u32(out, fm.height);
  detail::put_u32(out, fm.width);
  detail::put_values(out, fm.data);
}

inline FeatureMap read_feature_map(std::istream& in) {
  detail::expect_magic(in, kFeatureMapMagic);
  const std::size_t c = detail::get_u32(in), h = detail::get_u32(in), w = detail::get_u32(in);
  return FeatureMap(c, h, w, detail::get_values(in, c * h * w));
}

inline void write_weighted_sample(std::ostream& out, const WeightedSample& s) {
  if (s.gamma.rows() != s.target.rows() || s.gamma.cols() != s.target.cols())
    throw DimensionError("weighted sample target " + s.target.shape() + " and gamma " + s.gamma.shape() +
                         " differ");
  out.write(kWeightedSampleMagic.data(), 4);
  detail::put_u32(out, s.features.channels);
  detail::put_u32(out, s.features.height);
  detail::put_u32(out, s.features.width);
  detail::put_u32(out, s.target.rows());
  detail::put_u32(out, s.target.cols());
  detail::put_values(out, s.features.data);
  detail::put_values(out, s.target.span());
  detail::put_values(out, s.gamma.span());
}

inline WeightedSample read_weighted_sample(std::istream& in) {
  detail::expect_magic(in, kWeightedSampleMagic);
  const std::size_t c = detail::get_u32(in), h = detail::get_u32(in), w = detail::get_u32(in);
  const std::size_t oh = detail::get_u32(in), ow = detail::get_u32(in);
  WeightedSample s;
  s.features = FeatureMap(c, h, w, detail::get_values(in, c * h * w));
  s.target = Matrix(oh, ow, detail::get_values(in, oh * ow));
  s.gamma = Matrix(oh, ow, detail::get_values(in, oh * ow));
  return s;
}

}  // namespace rlsol
