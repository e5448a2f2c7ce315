#include "ramsift/sigcat.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <limits>
#include <set>

#include "ramsift/error.hpp"

namespace ramsift {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t at = text.find(sep, start);
    out.push_back(text.substr(start, at - start));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto& item : split(text, ',')) {
    if (!item.empty()) out.push_back(std::move(item));
  }
  return out;
}

TextSpan span_of(const ExtractedString& s, std::size_t pos, std::size_t len) {
  return TextSpan{s.offset_of(pos), s.text.substr(pos, len), s.encoding};
}

}  // namespace

const char* value_encoding_name(ValueEncoding e) noexcept {
  switch (e) {
    case ValueEncoding::percent_encoded: return "percent-encoded";
    case ValueEncoding::plaintext: return "plaintext";
    case ValueEncoding::opaque: return "opaque";
  }
  return "plaintext";
}

std::optional<ValueEncoding> parse_value_encoding(std::string_view name) {
  if (name == "percent-encoded") return ValueEncoding::percent_encoded;
  if (name == "plaintext") return ValueEncoding::plaintext;
  if (name == "opaque") return ValueEncoding::opaque;
  return std::nullopt;
}

const char* match_mode_name(MatchMode m) noexcept {
  return m == MatchMode::inline_body ? "inline" : "adjacent";
}

std::optional<MatchMode> parse_match_mode(std::string_view name) {
  if (name == "inline") return MatchMode::inline_body;
  if (name == "adjacent") return MatchMode::adjacent;
  return std::nullopt;
}

Catalog builtin_catalog() {
  return {
      {"sonicwall", "Sonicwall", {"uName"}, {"pass"}, {"userLogin.html", "auth1.html"},
       ValueEncoding::percent_encoded, UsernamePattern::none},
      {"facebook", "Facebook", {"email"}, {"pass"}, {"facebook.com/login.php"},
       ValueEncoding::percent_encoded, UsernamePattern::none},
      // Firefox keeps the address in the GAUSR cookie rather than a form field.
      {"gmail-ff", "Gmail (Firefox)", {"GAUSR=mail"}, {"Passwd"}, {"accounts.google"},
       ValueEncoding::percent_encoded, UsernamePattern::gausr_cookie},
      {"gmail-gc", "Gmail (Chrome)", {"Email"}, {"Passwd"}, {"accounts.google"},
       ValueEncoding::plaintext, UsernamePattern::none},
      {"irctc", "IRCTC", {"userName"}, {"password"}, {"irctc.co.in"},
       ValueEncoding::percent_encoded, UsernamePattern::none},
      {"sbi", "SBI", {"userName"}, {"password"}, {"onlinesbi.com"}, ValueEncoding::opaque,
       UsernamePattern::none},
  };
}

const CredentialSignature* find_signature(const Catalog& catalog, std::string_view app_id) {
  auto it = std::find_if(catalog.begin(), catalog.end(),
                         [&](const CredentialSignature& s) { return s.app_id == app_id; });
  return it == catalog.end() ? nullptr : &*it;
}

void validate_catalog(const Catalog& catalog) {
  std::set<std::string> ids;
  for (const auto& sig : catalog) {
    if (sig.app_id.empty()) throw Error(Errc::malformed_catalog, "signature with empty app_id");
    if (!ids.insert(sig.app_id).second) {
      throw Error(Errc::malformed_catalog, "duplicate app_id " + sig.app_id);
    }
    auto has_empty = [](const std::vector<std::string>& keys) {
      return keys.empty() || std::any_of(keys.begin(), keys.end(),
                                         [](const std::string& k) { return k.empty(); });
    };
    if (has_empty(sig.username_keys) || has_empty(sig.password_keys)) {
      throw Error(Errc::malformed_catalog, "signature " + sig.app_id + " has an empty key list");
    }
  }
}

Catalog load_catalog_overrides(std::istream& in, Catalog base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    auto fail = [&](const std::string& what) {
      throw Error(Errc::malformed_catalog,
                  "catalog line " + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() != 5) fail("expected 5 tab-separated fields");
    auto encoding = parse_value_encoding(fields[4]);
    if (!encoding) fail("unknown value_encoding '" + fields[4] + "'");
    CredentialSignature sig;
    sig.app_id = fields[0];
    sig.display_name = fields[0];
    sig.username_keys = split_list(fields[1]);
    sig.password_keys = split_list(fields[2]);
    sig.context_urls = split_list(fields[3]);
    sig.value_encoding = *encoding;
    if (sig.app_id.empty()) fail("empty app_id");
    if (sig.username_keys.empty() || sig.password_keys.empty()) fail("empty key list");

    auto it = std::find_if(base.begin(), base.end(),
                           [&](const CredentialSignature& s) { return s.app_id == sig.app_id; });
    if (it != base.end()) {
      sig.display_name = it->display_name;
      sig.username_pattern = it->username_pattern;
      *it = std::move(sig);
    } else {
      base.push_back(std::move(sig));
    }
  }
  validate_catalog(base);
  return base;
}

std::vector<KeyValuePair> parse_form_pairs(const ExtractedString& s) {
  std::vector<KeyValuePair> pairs;
  const std::string& text = s.text;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t amp = text.find('&', start);
    std::size_t end = amp == std::string::npos ? text.size() : amp;
    std::size_t eq = text.find('=', start);
    if (eq != std::string::npos && eq < end && eq > start) {
      KeyValuePair kv;
      kv.key = text.substr(start, eq - start);
      kv.raw_value = text.substr(eq + 1, end - eq - 1);
      kv.offset = s.offset_of(start);
      kv.value_offset = s.offset_of(eq + 1);
      kv.encoding = s.encoding;
      pairs.push_back(std::move(kv));
    }
    if (amp == std::string::npos) break;
    start = amp + 1;
  }
  return pairs;
}

bool key_equals(std::string_view a, std::string_view b, const KeyMatchOptions& opt) {
  if (!opt.case_insensitive) return a == b;
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

namespace {

bool key_in(std::string_view key, const std::vector<std::string>& keys,
            const KeyMatchOptions& opt) {
  return std::any_of(keys.begin(), keys.end(),
                     [&](const std::string& k) { return key_equals(key, k, opt); });
}

}  // namespace

std::optional<std::string> SignatureMatch::username_raw() const {
  if (!username_value) return std::nullopt;
  return username_value->text;
}

std::optional<std::string> SignatureMatch::password_raw() const {
  if (!password_value) return std::nullopt;
  return password_value->text;
}

std::vector<std::uint64_t> SignatureMatch::key_offsets() const {
  std::vector<std::uint64_t> out;
  if (username_key) out.push_back(username_key->offset);
  if (password_key) out.push_back(password_key->offset);
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t SignatureMatch::primary_offset() const {
  if (password_key) return password_key->offset;
  if (username_key) return username_key->offset;
  return 0;
}

std::string window_snippet(std::string_view text, std::size_t pos) {
  if (text.size() <= kSnippetChars) return std::string(text);
  std::size_t start = pos > kSnippetChars / 2 ? pos - kSnippetChars / 2 : 0;
  start = std::min(start, text.size() - kSnippetChars);
  return std::string(text.substr(start, kSnippetChars));
}

std::optional<SignatureMatch> match_inline(std::span<const KeyValuePair> pairs,
                                           const CredentialSignature& sig,
                                           const ExtractedString& carrier,
                                           const KeyMatchOptions& opt) {
  const KeyValuePair* user = nullptr;
  const KeyValuePair* pass = nullptr;
  for (const auto& kv : pairs) {
    if (kv.raw_value.empty()) continue;
    if (key_in(kv.key, sig.username_keys, opt) && (!user || kv.offset < user->offset)) user = &kv;
    if (key_in(kv.key, sig.password_keys, opt) && (!pass || kv.offset < pass->offset)) pass = &kv;
  }
  if (!user && !pass) return std::nullopt;

  SignatureMatch m;
  m.app_id = sig.app_id;
  m.mode = MatchMode::inline_body;
  auto to_spans = [&](const KeyValuePair& kv, std::optional<TextSpan>& key,
                      std::optional<TextSpan>& value) {
    key = TextSpan{kv.offset, kv.key, kv.encoding};
    value = TextSpan{kv.value_offset, kv.raw_value, kv.encoding};
  };
  if (user) to_spans(*user, m.username_key, m.username_value);
  if (pass) to_spans(*pass, m.password_key, m.password_value);
  std::size_t pos = static_cast<std::size_t>((m.primary_offset() - carrier.offset) / carrier.width());
  m.snippet = window_snippet(carrier.text, pos);
  return m;
}

AdjacentBinder::AdjacentBinder(std::span<const CredentialSignature> sigs, std::uint64_t delta,
                               KeyMatchOptions opt)
    : sigs_(sigs), delta_(delta), opt_(opt) {}

std::vector<AdjacentBinder::Role> AdjacentBinder::roles_of(const ExtractedString& s) const {
  std::vector<Role> roles;
  for (std::size_t i = 0; i < sigs_.size(); ++i) {
    if (key_in(s.text, sigs_[i].username_keys, opt_)) roles.push_back({i, KeyRole::username});
    if (key_in(s.text, sigs_[i].password_keys, opt_)) roles.push_back({i, KeyRole::password});
  }
  return roles;
}

bool AdjacentBinder::is_key_of(const ExtractedString& s, std::size_t sig_index) const {
  const auto& sig = sigs_[sig_index];
  return key_in(s.text, sig.username_keys, opt_) || key_in(s.text, sig.password_keys, opt_);
}

void AdjacentBinder::push(const ExtractedString& s, std::vector<KeyBinding>& out) {
  if (pending_ && s.offset >= pending_->end()) {
    if (s.offset - pending_->end() <= delta_) {
      for (const auto& role : pending_roles_) {
        if (is_key_of(s, role.sig_index)) continue;
        out.push_back(KeyBinding{role.sig_index, role.role,
                                 TextSpan{pending_->offset, pending_->text, pending_->encoding},
                                 TextSpan{s.offset, s.text, s.encoding}});
      }
    }
    pending_.reset();
    pending_roles_.clear();
  }
  auto roles = roles_of(s);
  if (!roles.empty()) {
    pending_ = s;
    pending_roles_ = std::move(roles);
  }
}

std::vector<SignatureMatch> combine_adjacent(std::span<const KeyBinding> bindings,
                                             const CredentialSignature& sig,
                                             std::uint64_t window) {
  std::vector<const KeyBinding*> users;
  std::vector<const KeyBinding*> passes;
  for (const auto& b : bindings) {
    (b.role == KeyRole::username ? users : passes).push_back(&b);
  }
  auto by_offset = [](const KeyBinding* a, const KeyBinding* b) {
    return a->key.offset < b->key.offset;
  };
  std::sort(users.begin(), users.end(), by_offset);
  std::sort(passes.begin(), passes.end(), by_offset);

  auto make = [&](const KeyBinding* u, const KeyBinding* p) {
    SignatureMatch m;
    m.app_id = sig.app_id;
    m.mode = MatchMode::adjacent;
    std::string snippet;
    if (u) {
      m.username_key = u->key;
      m.username_value = u->value;
    }
    if (p) {
      m.password_key = p->key;
      m.password_value = p->value;
    }
    std::vector<const KeyBinding*> parts;
    if (u) parts.push_back(u);
    if (p) parts.push_back(p);
    std::sort(parts.begin(), parts.end(), by_offset);
    for (const auto* b : parts) {
      if (!snippet.empty()) snippet += ' ';
      snippet += b->key.text + ' ' + b->value.text;
    }
    if (snippet.size() > kSnippetChars) snippet.resize(kSnippetChars);
    m.snippet = std::move(snippet);
    return m;
  };

  std::vector<SignatureMatch> out;
  std::vector<bool> claimed(users.size(), false);
  for (const auto* p : passes) {
    std::size_t best = users.size();
    std::uint64_t best_dist = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t i = 0; i < users.size(); ++i) {
      std::uint64_t a = users[i]->key.offset;
      std::uint64_t b = p->key.offset;
      std::uint64_t dist = a > b ? a - b : b - a;
      if (dist <= window && dist < best_dist) {
        best = i;
        best_dist = dist;
      }
    }
    if (best < users.size()) claimed[best] = true;
    out.push_back(make(best < users.size() ? users[best] : nullptr, p));
  }
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (!claimed[i]) out.push_back(make(users[i], nullptr));
  }
  std::sort(out.begin(), out.end(), [](const SignatureMatch& a, const SignatureMatch& b) {
    return a.primary_offset() < b.primary_offset();
  });
  return out;
}

std::vector<SignatureMatch> match_adjacent(std::span<const ExtractedString> strings,
                                           const CredentialSignature& sig, std::uint64_t delta,
                                           std::uint64_t window, const KeyMatchOptions& opt) {
  std::span<const CredentialSignature> one(&sig, 1);
  AdjacentBinder binder(one, delta, opt);
  std::vector<KeyBinding> bindings;
  for (const auto& s : strings) binder.push(s, bindings);
  return combine_adjacent(bindings, sig, window);
}

std::optional<CookieHit> find_cookie_username(const ExtractedString& s,
                                              const CredentialSignature& sig) {
  if (sig.username_pattern != UsernamePattern::gausr_cookie) return std::nullopt;
  std::size_t pos = s.text.find(kGausrMarker);
  if (pos == std::string::npos) return std::nullopt;
  std::size_t start = pos + kGausrMarker.size();
  std::size_t end = s.text.find_first_of("; ", start);
  if (end == std::string::npos) end = s.text.size();
  if (end == start) return std::nullopt;
  CookieHit hit;
  hit.marker_offset = s.offset_of(pos);
  hit.value = span_of(s, start, end - start);
  hit.snippet = window_snippet(s.text, pos);
  return hit;
}

std::optional<std::string> extract_cookie_username(const ExtractedString& s,
                                                   const CredentialSignature& sig) {
  auto hit = find_cookie_username(s, sig);
  if (!hit) return std::nullopt;
  return hit->value.text;
}

std::vector<std::uint64_t> context_url_hits(const ExtractedString& s,
                                            const CredentialSignature& sig) {
  std::vector<std::uint64_t> hits;
  for (const auto& url : sig.context_urls) {
    if (url.empty()) continue;
    for (std::size_t at = s.text.find(url); at != std::string::npos;
         at = s.text.find(url, at + 1)) {
      hits.push_back(s.offset_of(at));
    }
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

}  // namespace ramsift
