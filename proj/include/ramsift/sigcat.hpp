#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ramsift/carver.hpp"

namespace ramsift {

enum class ValueEncoding { percent_encoded, plaintext, opaque };
enum class UsernamePattern { none, gausr_cookie };
enum class MatchMode { inline_body, adjacent };
enum class KeyRole { username, password };

const char* value_encoding_name(ValueEncoding e) noexcept;
std::optional<ValueEncoding> parse_value_encoding(std::string_view name);
const char* match_mode_name(MatchMode m) noexcept;
std::optional<MatchMode> parse_match_mode(std::string_view name);

/// Keyword anchors for one application's login form.
struct CredentialSignature {
  std::string app_id;
  std::string display_name;
  std::vector<std::string> username_keys;
  std::vector<std::string> password_keys;
  std::vector<std::string> context_urls;
  ValueEncoding value_encoding = ValueEncoding::plaintext;
  UsernamePattern username_pattern = UsernamePattern::none;
};

using Catalog = std::vector<CredentialSignature>;

/// The six signatures: sonicwall, facebook, gmail-ff, gmail-gc, irctc, sbi.
Catalog builtin_catalog();

const CredentialSignature* find_signature(const Catalog& catalog, std::string_view app_id);

/// Reads `app_id<TAB>username_keys<TAB>password_keys<TAB>context_urls<TAB>value_encoding`
/// lines (lists comma separated, `#` comments) and merges them over base by
/// app_id. Overrides keep the base entry's display name and username pattern.
Catalog load_catalog_overrides(std::istream& in, Catalog base);

/// Throws malformed_catalog on duplicate app ids or empty key lists.
void validate_catalog(const Catalog& catalog);

/// A located piece of carved text.
struct TextSpan {
  std::uint64_t offset = 0;
  std::string text;
  Encoding encoding = Encoding::ascii;

  std::uint64_t byte_length() const noexcept {
    return (encoding == Encoding::ascii ? 1 : 2) * text.size();
  }
  friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

struct KeyValuePair {
  std::string key;
  std::string raw_value;
  std::uint64_t offset = 0;        // image offset of the key
  std::uint64_t value_offset = 0;  // image offset of the value
  Encoding encoding = Encoding::ascii;

  friend bool operator==(const KeyValuePair&, const KeyValuePair&) = default;
};

/// Splits `k=v&k=v` form bodies. Fragments without '=' or with an empty key
/// are dropped. Never fails.
std::vector<KeyValuePair> parse_form_pairs(const ExtractedString& s);

struct KeyMatchOptions {
  bool case_insensitive = false;
};

bool key_equals(std::string_view a, std::string_view b, const KeyMatchOptions& opt);

struct SignatureMatch {
  std::string app_id;
  MatchMode mode = MatchMode::inline_body;
  std::optional<TextSpan> username_key;
  std::optional<TextSpan> username_value;
  std::optional<TextSpan> password_key;
  std::optional<TextSpan> password_value;
  std::string snippet;

  std::optional<std::string> username_raw() const;
  std::optional<std::string> password_raw() const;
  /// Offsets of every matched key, ascending.
  std::vector<std::uint64_t> key_offsets() const;
  /// Password key offset when present, else the username key offset.
  std::uint64_t primary_offset() const;
  int field_count() const noexcept { return (username_value ? 1 : 0) + (password_value ? 1 : 0); }
};

/// Builds the <=256 character snippet of `text` centred on character `pos`.
std::string window_snippet(std::string_view text, std::size_t pos);

inline constexpr std::size_t kSnippetChars = 256;

/// Form-body match within one carved string. Picks, per role, the pair with
/// the lowest offset whose key belongs to the signature and whose value is
/// non-empty, so the result does not depend on pair order.
std::optional<SignatureMatch> match_inline(std::span<const KeyValuePair> pairs,
                                           const CredentialSignature& sig,
                                           const ExtractedString& carrier,
                                           const KeyMatchOptions& opt = {});

/// A key that was carved as its own string, bound to the following string.
struct KeyBinding {
  std::size_t sig_index = 0;
  KeyRole role = KeyRole::username;
  TextSpan key;
  TextSpan value;
};

/// Incremental key/value binder for the adjacent layout. Feed carved strings
/// in offset order; a key string binds the next string if that string starts
/// within `delta` bytes after the key ends and is not itself a key of the
/// same signature.
class AdjacentBinder {
 public:
  AdjacentBinder(std::span<const CredentialSignature> sigs, std::uint64_t delta,
                 KeyMatchOptions opt = {});

  void push(const ExtractedString& s, std::vector<KeyBinding>& out);

 private:
  struct Role {
    std::size_t sig_index;
    KeyRole role;
  };
  std::vector<Role> roles_of(const ExtractedString& s) const;
  bool is_key_of(const ExtractedString& s, std::size_t sig_index) const;

  std::span<const CredentialSignature> sigs_;
  std::uint64_t delta_;
  KeyMatchOptions opt_;
  std::optional<ExtractedString> pending_;
  std::vector<Role> pending_roles_;
};

/// Pairs each password binding with the nearest username binding within
/// `window` bytes (earlier wins a tie). Usernames no password claimed become
/// username-only matches. Input bindings must all belong to `sig`.
std::vector<SignatureMatch> combine_adjacent(std::span<const KeyBinding> bindings,
                                             const CredentialSignature& sig,
                                             std::uint64_t window);

/// AdjacentBinder + combine_adjacent over an offset-ordered window.
std::vector<SignatureMatch> match_adjacent(std::span<const ExtractedString> strings,
                                           const CredentialSignature& sig, std::uint64_t delta,
                                           std::uint64_t window = 1024,
                                           const KeyMatchOptions& opt = {});

inline constexpr std::string_view kGausrMarker = "GAUSR=mail:";

struct CookieHit {
  std::uint64_t marker_offset = 0;
  TextSpan value;
  std::string snippet;
};

/// For signatures with the GAUSR cookie pattern: the run after `GAUSR=mail:`
/// up to ';', whitespace or end of string. Empty runs are ignored.
std::optional<CookieHit> find_cookie_username(const ExtractedString& s,
                                              const CredentialSignature& sig);

std::optional<std::string> extract_cookie_username(const ExtractedString& s,
                                                   const CredentialSignature& sig);

/// Image offsets of every occurrence of any of sig's context URLs in s.
std::vector<std::uint64_t> context_url_hits(const ExtractedString& s,
                                            const CredentialSignature& sig);

}  // namespace ramsift
