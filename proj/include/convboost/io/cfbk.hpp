#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>

#include "convboost/channels.hpp"
#include "convboost/error.hpp"
#include "convboost/io/files.hpp"
#include "convboost/random.hpp"

// CFBK filter-bank files: "CFBK", then little-endian u32 version (1), F, cin,
// kh, kw, then F float32 biases and F*cin*kh*kw float32 weights
// (filter-major, plane-major, row-major). No padding, no trailing bytes.
namespace convboost::io {

inline constexpr std::uint32_t kCfbkVersion = 1;
inline constexpr std::size_t kCfbkHeaderBytes = 4 + 5 * 4;

inline std::size_t cfbk_payload_bytes(std::uint32_t filters, std::uint32_t cin, std::uint32_t kh,
                                      std::uint32_t kw) {
  return 4u * (static_cast<std::size_t>(filters) +
               static_cast<std::size_t>(filters) * cin * kh * kw);
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

inline std::uint32_t get_u32(std::string_view in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

inline float get_f32(std::string_view in, std::size_t off) {
  const std::uint32_t bits = get_u32(in, off);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

inline FormatError cfbk_error(std::size_t offset, const std::string& what) {
  std::ostringstream os;
  os << "CFBK format error at byte " << offset << ": " << what;
  return FormatError(os.str());
}

}  // namespace detail

// Weights and biases are narrowed to float32.
inline std::string encode_cfbk(const FilterBank& bank) {
  bank.validate();
  std::string out;
  out.reserve(kCfbkHeaderBytes + cfbk_payload_bytes(bank.filters, bank.cin, bank.kh, bank.kw));
  out.append("CFBK");
  detail::put_u32(out, kCfbkVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(bank.filters));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.cin));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.kh));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.kw));
  for (double b : bank.biases) detail::put_f32(out, static_cast<float>(b));
  for (double w : bank.weights) detail::put_f32(out, static_cast<float>(w));
  return out;
}

inline FilterBank decode_cfbk(std::string_view bytes) {
  if (bytes.size() < 4) throw detail::cfbk_error(bytes.size(), "file shorter than the magic");
  if (bytes.substr(0, 4) != "CFBK") throw detail::cfbk_error(0, "bad magic");
  if (bytes.size() < kCfbkHeaderBytes)
    throw detail::cfbk_error(bytes.size(), "truncated header");
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kCfbkVersion)
    throw detail::cfbk_error(4, "unsupported version " + std::to_string(version));
  const std::uint32_t f = detail::get_u32(bytes, 8), cin = detail::get_u32(bytes, 12);
  const std::uint32_t kh = detail::get_u32(bytes, 16), kw = detail::get_u32(bytes, 20);
  if (f == 0 || cin == 0 || kh == 0 || kw == 0)
    throw detail::cfbk_error(8, "zero dimension in header");
  if (f > (1u << 16) || cin > (1u << 16) || kh > 1024 || kw > 1024)
    throw detail::cfbk_error(8, "implausible header dimensions");
  if (kh % 2 == 0 || kw % 2 == 0) throw detail::cfbk_error(16, "kernel sizes must be odd");
  const std::size_t expected = kCfbkHeaderBytes + cfbk_payload_bytes(f, cin, kh, kw);
  if (bytes.size() < expected) {
    std::ostringstream os;
    os << "truncated payload: expected " << expected << " bytes, got " << bytes.size();
    throw detail::cfbk_error(bytes.size(), os.str());
  }
  if (bytes.size() > expected) throw detail::cfbk_error(expected, "trailing bytes after payload");

  FilterBank bank;
  bank.filters = static_cast<int>(f);
  bank.cin = static_cast<int>(cin);
  bank.kh = static_cast<int>(kh);
  bank.kw = static_cast<int>(kw);
  bank.source = BankSource::kLoaded;
  std::size_t off = kCfbkHeaderBytes;
  bank.biases.resize(f);
  for (auto& b : bank.biases) {
    b = detail::get_f32(bytes, off);
    off += 4;
  }
  bank.weights.resize(static_cast<std::size_t>(f) * cin * kh * kw);
  for (auto& w : bank.weights) {
    w = detail::get_f32(bytes, off);
    off += 4;
  }
  for (std::size_t i = 0; i < bank.biases.size(); ++i)
    if (!std::isfinite(bank.biases[i])) throw detail::cfbk_error(kCfbkHeaderBytes + 4 * i, "non-finite bias");
  for (std::size_t i = 0; i < bank.weights.size(); ++i)
    if (!std::isfinite(bank.weights[i]))
      throw detail::cfbk_error(kCfbkHeaderBytes + 4 * (f + i), "non-finite weight");
  return bank;
}

inline FilterBank load_filter_bank(const std::filesystem::path& path) {
  return decode_cfbk(read_file(path));
}

inline void save_filter_bank(const FilterBank& bank, const std::filesystem::path& path) {
  write_file(path, encode_cfbk(bank));
}

// FNV-1a over the CFBK encoding; stable across save/load.
inline std::string bank_fingerprint(const FilterBank& bank) {
  return hex64(fnv1a64(encode_cfbk(bank)));
}

// A bank as it reads back from its CFBK encoding (float32 precision).
inline FilterBank to_float_precision(const FilterBank& bank) {
  FilterBank out = decode_cfbk(encode_cfbk(bank));
  out.source = bank.source;
  out.seed = bank.seed;
  return out;
}

}  // namespace convboost::io
