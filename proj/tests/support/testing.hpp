#pragma once

#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "ramsift/error.hpp"
#include "ramsift/fabricator.hpp"

#define CHECK_ERRC(expr, errc)                        \
  do {                                                \
    bool thrown_ = false;                             \
    try {                                             \
      (void)(expr);                                   \
    } catch (const ramsift::Error& e_) {              \
      thrown_ = true;                                 \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());  \
    }                                                 \
    CHECK_MESSAGE(thrown_, "expected " #errc);        \
  } while (0)

namespace testing {

inline std::vector<std::uint8_t> fabricated_bytes(const ramsift::FabricationPlan& plan, std::size_t index) {
  std::ostringstream out;
  ramsift::write_image(plan, index, out);
  auto s = out.str();
  return {s.begin(), s.end()};
}

inline void put(std::vector<std::uint8_t>& bytes, std::uint64_t at, std::string_view text) {
  std::copy(text.begin(), text.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at));
}

inline void put_utf16(std::vector<std::uint8_t>& bytes, std::uint64_t at, std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    bytes[at + 2 * i] = static_cast<std::uint8_t>(text[i]);
    bytes[at + 2 * i + 1] = 0;
  }
}

// Zero image with the named templates rendered at the given offsets.
inline ramsift::MemoryImage with_templates(std::size_t size,
                                           const std::vector<std::pair<std::string, std::uint64_t>>& at,
                                           std::string label = "Img") {
  std::vector<std::uint8_t> bytes(size, 0);
  for (const auto& [id, offset] : at) {
    auto rendered = ramsift::render_template(*ramsift::find_template(id));
    std::copy(rendered.begin(), rendered.end(), bytes.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  return ramsift::MemoryImage::from_bytes(std::move(bytes), std::move(label));
}

}  // namespace testing
