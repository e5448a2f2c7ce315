#include "ramsift/decoder.hpp"

#include <algorithm>

namespace ramsift {

namespace {

int hex_value(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool escape_at(std::string_view s, std::size_t i) noexcept {
  return i + 2 < s.size() && s[i] == '%' && hex_value(s[i + 1]) >= 0 &&
         hex_value(s[i + 2]) >= 0;
}

}  // namespace

const char* value_class_name(ValueClass c) noexcept {
  switch (c) {
    case ValueClass::plaintext: return "plaintext";
    case ValueClass::percent_encoded: return "percent-encoded";
    case ValueClass::suspected_encrypted: return "suspected-encrypted";
  }
  return "plaintext";
}

std::string percent_decode(std::string_view raw, bool plus_as_space) {
  std::string out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    char c = raw[i];
    if (escape_at(raw, i)) {
      out.push_back(static_cast<char>(hex_value(raw[i + 1]) * 16 + hex_value(raw[i + 2])));
      i += 2;
    } else if (plus_as_space && c == '+') {
      out.push_back(' ');
    } else {
      out.push_back(c);
    }
  }
  return out;
}

bool has_percent_escape(std::string_view raw) noexcept {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (escape_at(raw, i)) return true;
  }
  return false;
}

bool looks_like_hex_digest(std::string_view raw) noexcept {
  return raw.size() == 32 && std::all_of(raw.begin(), raw.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

DecodedValue classify_value(std::string_view raw, ValueEncoding sig_encoding,
                            bool plus_as_space) {
  DecodedValue v;
  v.raw = std::string(raw);
  if (sig_encoding == ValueEncoding::opaque || looks_like_hex_digest(raw)) {
    v.decoded = v.raw;
    v.classification = ValueClass::suspected_encrypted;
  } else if (has_percent_escape(raw) || (plus_as_space && raw.find('+') != std::string_view::npos)) {
    v.decoded = percent_decode(raw, plus_as_space);
    v.classification = ValueClass::percent_encoded;
  } else {
    v.decoded = v.raw;
    v.classification = ValueClass::plaintext;
  }
  return v;
}

}  // namespace ramsift
