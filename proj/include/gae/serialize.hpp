#pragma once

// Binary model container.
//
//   bytes 0..7   "GAEMODEL"
//   u32          format version (1)
//   u32          layer count
//   per layer:   u32 input dim m, u32 hidden dim l,
//                W_H (l x m), b_H (l), W_Q (m x l), b_Q (m)
//
// Integers are little-endian; matrices are row-major IEEE-754 doubles stored
// as little-endian 64-bit words, so a round trip is bit-exact.

#include "gae/stack.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

namespace gae {

inline constexpr std::array<char, 8> kModelMagic{'G', 'A', 'E', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), bytes);
  if (in.gcount() != bytes) throw InvalidInput("model file is truncated");
  std::uint64_t v = 0;
  for (int i = bytes; i-- > 0;) v = (v << 8) | b[i];
  return v;
}

template <class Mat>
void put_row_major(std::ostream& out, const Mat& a) {
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) put_u64(out, std::bit_cast<std::uint64_t>(a(r, c)));
}

template <class Mat>
void get_row_major(std::istream& in, Mat& a) {
  for (Index r = 0; r < a.rows(); ++r)
    for (Index c = 0; c < a.cols(); ++c) a(r, c) = std::bit_cast<double>(get_le(in, 8));
}

}  // namespace detail

inline void write_model(std::ostream& out, const GaeModel& model) {
  check_chain(model);
  out.write(kModelMagic.data(), kModelMagic.size());
  detail::put_u32(out, kModelFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    detail::put_u32(out, static_cast<std::uint32_t>(l.input_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(l.hidden_dim()));
    detail::put_row_major(out, l.W_H);
    detail::put_row_major(out, l.b_H);
    detail::put_row_major(out, l.W_Q);
    detail::put_row_major(out, l.b_Q);
  }
}

inline GaeModel read_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 8 || magic != kModelMagic) throw InvalidInput("not a GAE model file");
  const auto version = static_cast<std::uint32_t>(detail::get_le(in, 4));
  if (version != kModelFormatVersion)
    throw InvalidInput("unsupported model format version " + std::to_string(version));
  const auto count = static_cast<std::uint32_t>(detail::get_le(in, 4));
  require(count >= 1, "model has no layers");
  GaeModel model;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto m = static_cast<Index>(detail::get_le(in, 4));
    const auto l = static_cast<Index>(detail::get_le(in, 4));
    require(m > 0 && l > 0, "model layer has a zero dimension");
    LayerParams p(m, l);
    detail::get_row_major(in, p.W_H);
    detail::get_row_major(in, p.b_H);
    detail::get_row_major(in, p.W_Q);
    detail::get_row_major(in, p.b_Q);
    model.layers.push_back(std::move(p));
  }
  check_chain(model);
  return model;
}

inline void save_model(const std::filesystem::path& path, const GaeModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
  write_model(out, model);
}

inline GaeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  return read_model(in);
}

}  // namespace gae
