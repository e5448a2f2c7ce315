#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "ramsift/carver.hpp"

namespace oracle {

inline bool printable(std::uint8_t b) { return b >= 0x20 && b <= 0x7e; }

struct Carved {
  std::uint64_t offset;
  std::string text;
  bool utf16;
  friend bool operator==(const Carved&, const Carved&) = default;
  friend bool operator<(const Carved& a, const Carved& b) {
    return std::tie(a.offset, a.utf16, a.text) < std::tie(b.offset, b.utf16, b.text);
  }
};

inline void emit_pieces(std::vector<Carved>& out, std::uint64_t start, const std::string& run,
                        bool utf16, std::size_t min_len, std::size_t max_len) {
  std::uint64_t width = utf16 ? 2 : 1;
  for (std::size_t k = 0; k < run.size(); k += max_len) {
    std::string piece = run.substr(k, max_len);
    if (piece.size() >= min_len) out.push_back({start + k * width, piece, utf16});
  }
}

// Tests every position independently: a run starts wherever the unit at i
// qualifies and the unit before it does not.
inline std::vector<Carved> brute_force_carve(const std::vector<std::uint8_t>& b, std::size_t min_len,
                                             std::size_t max_len, bool ascii, bool utf16) {
  std::vector<Carved> out;
  const std::size_t n = b.size();
  auto pair_at = [&](std::size_t i) { return i + 1 < n && printable(b[i]) && b[i + 1] == 0; };
  for (std::size_t i = 0; i < n; ++i) {
    if (ascii && printable(b[i]) && (i == 0 || !printable(b[i - 1]))) {
      std::string run;
      for (std::size_t j = i; j < n && printable(b[j]); ++j) run += static_cast<char>(b[j]);
      emit_pieces(out, i, run, false, min_len, max_len);
    }
    if (utf16 && pair_at(i) && !(i >= 2 && pair_at(i - 2))) {
      std::string run;
      for (std::size_t j = i; pair_at(j); j += 2) run += static_cast<char>(b[j]);
      emit_pieces(out, i, run, true, min_len, max_len);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<Carved> from_carver(const std::vector<ramsift::ExtractedString>& v) {
  std::vector<Carved> out;
  for (const auto& s : v) out.push_back({s.offset, s.text, s.encoding == ramsift::Encoding::utf16le});
  return out;
}

// Buffer with the given share of printable bytes, NUL-heavy non-printables,
// and occasional UTF-16LE runs so both encodings get exercised.
inline std::vector<std::uint8_t> random_buffer(std::mt19937_64& rng, std::size_t size, double density) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::uint8_t> b(size);
  for (auto& x : b) {
    double u = unit(rng);
    if (u < density) x = static_cast<std::uint8_t>(0x20 + rng() % 95);
    else if (u < density + (1 - density) / 2) x = 0;
    else {
      auto idx = rng() % 161;
      x = static_cast<std::uint8_t>(idx < 32 ? idx : 0x7f + (idx - 32));
    }
  }
  std::size_t runs = size / 512;
  for (std::size_t r = 0; r < runs; ++r) {
    std::size_t len = 1 + rng() % 40;
    std::size_t at = rng() % size;
    for (std::size_t k = 0; k < len && at + 2 * k + 1 < size; ++k) {
      b[at + 2 * k] = static_cast<std::uint8_t>(0x20 + rng() % 95);
      b[at + 2 * k + 1] = 0;
    }
  }
  return b;
}

// Escapes everything outside [A-Za-z0-9*_.-].
inline std::string percent_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '*' ||
        c == '_' || c == '.' || c == '-') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ramsift-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
