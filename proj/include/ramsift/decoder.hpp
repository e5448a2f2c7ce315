#pragma once

#include <string>
#include <string_view>

#include "ramsift/sigcat.hpp"

namespace ramsift {

enum class ValueClass { plaintext, percent_encoded, suspected_encrypted };

const char* value_class_name(ValueClass c) noexcept;

struct DecodedValue {
  std::string raw;
  std::string decoded;
  ValueClass classification = ValueClass::plaintext;
};

/// `%XY` (either case) becomes the byte 0xXY; any other '%' is copied
/// through. With plus_as_space, '+' becomes ' '. Total: never throws.
std::string percent_decode(std::string_view raw, bool plus_as_space = false);

bool has_percent_escape(std::string_view raw) noexcept;

/// Exactly 32 characters of [0-9a-f]: the shape of the stored SBI value.
bool looks_like_hex_digest(std::string_view raw) noexcept;

/// Opaque signatures and hex digests are flagged suspected_encrypted and left
/// alone; values with a valid escape are decoded; everything else is plaintext.
DecodedValue classify_value(std::string_view raw, ValueEncoding sig_encoding,
                            bool plus_as_space = false);

}  // namespace ramsift
