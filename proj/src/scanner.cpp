#include "ramsift/scanner.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <numeric>
#include <tuple>

#include "ramsift/error.hpp"

namespace ramsift {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct UrlHit {
  std::uint64_t offset;
  std::size_t sig;
};

struct Candidate {
  std::size_t sig;
  SignatureMatch match;
  Confidence confidence = Confidence::low;
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void join(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

// Collects keyword events from offset-ordered strings and resolves them in
// clusters. A cluster closes once no later string can produce an event or a
// context hit within `window` of it.
class Resolver {
 public:
  Resolver(const Catalog& catalog, const ScanOptions& options, const ProcessMap* map,
           std::string label, bool streaming)
      : catalog_(catalog),
        opt_(options),
        map_(map),
        label_(std::move(label)),
        streaming_(streaming),
        binder_(catalog, options.delta, options.keys) {}

  void push(const ExtractedString& s) {
    ++strings_;
    // A binding produced by this string may be keyed on the previous one.
    if (streaming_ && has_events() && prev_offset_ && *prev_offset_ > last_event_ + opt_.window)
      close();
    if (!has_events() && prev_offset_) {
      std::uint64_t floor = *prev_offset_ > opt_.window ? *prev_offset_ - opt_.window : 0;
      std::erase_if(urls_, [floor](const UrlHit& u) { return u.offset < floor; });
    }

    for (std::size_t i = 0; i < catalog_.size(); ++i) {
      for (auto o : context_url_hits(s, catalog_[i])) urls_.push_back({o, i});
    }

    auto pairs = parse_form_pairs(s);
    if (!pairs.empty()) {
      for (std::size_t i = 0; i < catalog_.size(); ++i) {
        if (auto m = match_inline(pairs, catalog_[i], s, opt_.keys)) {
          note_event(*m);
          inline_.push_back({i, std::move(*m)});
        }
      }
    }
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
      if (auto hit = find_cookie_username(s, catalog_[i])) {
        note_event(hit->marker_offset);
        cookies_.push_back({i, std::move(*hit)});
      }
    }
    std::size_t before = bindings_.size();
    binder_.push(s, bindings_);
    for (std::size_t k = before; k < bindings_.size(); ++k) {
      note_event(bindings_[k].key.offset);
      note_event(bindings_[k].value.offset);
    }

    peak_events_ = std::max(peak_events_, event_count());
    peak_urls_ = std::max(peak_urls_, urls_.size());
    prev_offset_ = s.offset;
  }

  std::vector<CredentialFinding> finish() {
    if (has_events()) close();
    return std::move(findings_);
  }

  void fill(ScanStats& stats) const {
    stats.strings = strings_;
    stats.clusters = clusters_;
    stats.peak_cluster_events = peak_events_;
    stats.peak_context_hits = peak_urls_;
  }

 private:
  struct SigCookie {
    std::size_t sig;
    CookieHit hit;
    bool claimed = false;
  };

  bool has_events() const { return event_count() > 0; }
  std::size_t event_count() const { return inline_.size() + cookies_.size() + bindings_.size(); }

  void note_event(std::uint64_t offset) {
    last_event_ = any_event_ ? std::max(last_event_, offset) : offset;
    any_event_ = true;
  }
  void note_event(const SignatureMatch& m) {
    for (auto o : m.key_offsets()) note_event(o);
  }

  Confidence confidence_for(std::uint64_t offset, std::size_t sig) const {
    std::uint64_t lo = offset > opt_.window ? offset - opt_.window : 0;
    std::uint64_t hi = offset + opt_.window;
    for (const auto& u : urls_)
      if (u.sig == sig && u.offset >= lo && u.offset <= hi) return Confidence::high;
    return Confidence::low;
  }

  void attach_cookie(Candidate& c, SigCookie& cookie) {
    c.match.username_key = TextSpan{cookie.hit.marker_offset,
                                    std::string(kGausrMarker.substr(0, kGausrMarker.size() - 1)),
                                    cookie.hit.value.encoding};
    c.match.username_value = cookie.hit.value;
    cookie.claimed = true;
  }

  void close() {
    ++clusters_;
    std::vector<Candidate> cands;
    for (auto& [sig, m] : inline_) cands.push_back({sig, std::move(m)});
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
      std::vector<KeyBinding> mine;
      for (const auto& b : bindings_)
        if (b.sig_index == i) mine.push_back(b);
      if (mine.empty()) continue;
      for (auto& m : combine_adjacent(mine, catalog_[i], opt_.window)) cands.push_back({i, std::move(m)});
    }

    for (auto& c : cands) {
      if (c.match.username_value || !c.match.password_key) continue;
      if (catalog_[c.sig].username_pattern != UsernamePattern::gausr_cookie) continue;
      std::uint64_t o = c.match.primary_offset();
      SigCookie* best = nullptr;
      std::uint64_t best_d = 0;
      for (auto& ck : cookies_) {
        if (ck.sig != c.sig) continue;
        std::uint64_t m = ck.hit.marker_offset;
        std::uint64_t d = m > o ? m - o : o - m;
        if (d > opt_.window) continue;
        if (!best || d < best_d) {
          best = &ck;
          best_d = d;
        }
      }
      if (best) attach_cookie(c, *best);
    }
    for (auto& ck : cookies_) {
      if (ck.claimed) continue;
      Candidate c{ck.sig, {}};
      c.match.app_id = catalog_[ck.sig].app_id;
      c.match.mode = MatchMode::inline_body;
      attach_cookie(c, ck);
      c.match.snippet = ck.hit.snippet;
      cands.push_back(std::move(c));
    }

    for (auto& c : cands) c.confidence = confidence_for(c.match.primary_offset(), c.sig);

    DisjointSets groups(cands.size());
    std::vector<std::pair<std::uint64_t, std::size_t>> keys;
    for (std::size_t i = 0; i < cands.size(); ++i)
      for (auto o : cands[i].match.key_offsets()) keys.emplace_back(o, i);
    std::sort(keys.begin(), keys.end());
    for (std::size_t k = 1; k < keys.size(); ++k)
      if (keys[k].first == keys[k - 1].first) groups.join(keys[k].second, keys[k - 1].second);

    auto rank = [&](const Candidate& c) {
      return std::make_tuple(c.confidence == Confidence::high ? 1 : 0, c.match.field_count(),
                             matches_application(catalog_[c.sig], opt_.session.application) ? 1 : 0);
    };
    std::vector<std::tuple<int, int, int>> best(cands.size(), {-1, -1, -1});
    for (std::size_t i = 0; i < cands.size(); ++i) {
      auto& b = best[groups.find(i)];
      b = std::max(b, rank(cands[i]));
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (rank(cands[i]) == best[groups.find(i)]) findings_.push_back(to_finding(cands[i]));
    }

    inline_.clear();
    cookies_.clear();
    bindings_.clear();
    any_event_ = false;
  }

  CredentialFinding to_finding(const Candidate& c) const {
    const auto& sig = catalog_[c.sig];
    const auto& m = c.match;
    bool inline_mode = m.mode == MatchMode::inline_body;
    CredentialFinding f;
    f.app_id = sig.app_id;
    f.image_label = label_;
    if (auto u = m.username_raw()) {
      f.username = sig.value_encoding == ValueEncoding::percent_encoded
                       ? percent_decode(*u, inline_mode)
                       : *u;
    }
    if (auto p = m.password_raw()) {
      auto dv = classify_value(*p, sig.value_encoding, inline_mode);
      f.password_raw = *p;
      f.encrypted = dv.classification == ValueClass::suspected_encrypted;
      if (!f.encrypted) f.password_decoded = dv.decoded;
    }
    f.match_mode = m.mode;
    f.offset = m.primary_offset();
    f.context_snippet = m.snippet;
    f.confidence = c.confidence;
    if (map_) f.attributions = attribute(f.offset, *map_);
    f.evidence = {m.username_key, m.username_value, m.password_key, m.password_value};
    return f;
  }

  const Catalog& catalog_;
  const ScanOptions& opt_;
  const ProcessMap* map_;
  std::string label_;
  bool streaming_;
  AdjacentBinder binder_;

  std::vector<std::pair<std::size_t, SignatureMatch>> inline_;
  std::vector<SigCookie> cookies_;
  std::vector<KeyBinding> bindings_;
  std::deque<UrlHit> urls_;
  std::uint64_t last_event_ = 0;
  bool any_event_ = false;
  std::optional<std::uint64_t> prev_offset_;

  std::vector<CredentialFinding> findings_;
  std::uint64_t strings_ = 0;
  std::uint64_t clusters_ = 0;
  std::size_t peak_events_ = 0;
  std::size_t peak_urls_ = 0;
};

void sort_findings(std::vector<CredentialFinding>& v) {
  std::stable_sort(v.begin(), v.end(), [](const CredentialFinding& a, const CredentialFinding& b) {
    return std::tie(a.offset, a.app_id) < std::tie(b.offset, b.app_id);
  });
}

}  // namespace

bool matches_application(const CredentialSignature& sig, std::string_view application) {
  std::string app = lower(trim(application));
  if (app.empty()) return false;
  if (app == lower(sig.app_id) || app == lower(sig.display_name)) return true;
  auto dash = sig.app_id.find('-');
  return dash != std::string::npos && app == lower(sig.app_id.substr(0, dash));
}

const char* confidence_name(Confidence c) noexcept { return c == Confidence::high ? "HIGH" : "LOW"; }

std::optional<Confidence> parse_confidence(std::string_view name) {
  if (name == "HIGH") return Confidence::high;
  if (name == "LOW") return Confidence::low;
  return std::nullopt;
}

void validate(const ScanOptions& options) {
  validate(options.carve);
  if (options.window == 0) throw Error(Errc::invalid_options, "window must be positive");
}

bool CredentialFinding::same_report(const CredentialFinding& o) const {
  return std::tie(app_id, username, password_raw, password_decoded, encrypted, match_mode, offset,
                  context_snippet, confidence, attributions) ==
         std::tie(o.app_id, o.username, o.password_raw, o.password_decoded, o.encrypted,
                  o.match_mode, o.offset, o.context_snippet, o.confidence, o.attributions);
}

Confidence assign_confidence(std::uint64_t offset, std::span<const ExtractedString> context,
                             const CredentialSignature& sig, std::uint64_t window) {
  std::uint64_t lo = offset > window ? offset - window : 0;
  for (const auto& s : context) {
    for (auto o : context_url_hits(s, sig))
      if (o >= lo && o <= offset + window) return Confidence::high;
  }
  return Confidence::low;
}

std::vector<CredentialFinding> scan_image(const MemoryImage& image, const Catalog& catalog,
                                          const ScanOptions& options, const ProcessMap* map,
                                          ScanStats* stats) {
  validate(options);
  Resolver r(catalog, options, map, image.label(), true);
  auto cs = carve_strings(image, options.carve, [&](ExtractedString&& s) { r.push(s); });
  auto out = r.finish();
  sort_findings(out);
  if (stats) {
    r.fill(*stats);
    stats->carve = cs;
  }
  return out;
}

std::vector<CredentialFinding> scan_strings(std::span<const ExtractedString> strings,
                                            const std::string& image_label,
                                            const Catalog& catalog, const ScanOptions& options,
                                            const ProcessMap* map) {
  validate(options);
  Resolver r(catalog, options, map, image_label, false);
  for (const auto& s : strings) r.push(s);
  auto out = r.finish();
  sort_findings(out);
  return out;
}

std::vector<MatrixColumn> table1_columns() {
  return {{"sonicwall", "MF"}, {"sonicwall", "GC"}, {"facebook", "MF"}, {"facebook", "GC"},
          {"gmail-ff", "MF"},  {"gmail-gc", "GC"},  {"irctc", "MF"},    {"irctc", "GC"},
          {"sbi", "MF"},       {"sbi", "GC"}};
}

std::vector<MatrixColumn> parse_columns(std::string_view spec) {
  std::vector<MatrixColumn> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    auto comma = spec.find(',', pos);
    auto item = trim(spec.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                        : comma - pos));
    auto slash = item.find('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == item.size())
      throw Error(Errc::invalid_options, "bad column '" + item + "', expected app/browser");
    out.push_back({item.substr(0, slash), normalize_browser(item.substr(slash + 1))});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string browser_tag_for_process(std::string_view process_name) {
  auto p = lower(process_name);
  if (p == "firefox.exe") return "MF";
  if (p == "chrome.exe") return "GC";
  return {};
}

std::string normalize_browser(std::string_view browser) {
  auto b = lower(trim(browser));
  if (b == "mf" || b == "firefox" || b == "mozilla firefox" || b == "firefox.exe") return "MF";
  if (b == "gc" || b == "chrome" || b == "google chrome" || b == "chrome.exe") return "GC";
  return trim(browser);
}

std::string finding_browser(const CredentialFinding& finding, const SessionMeta& session) {
  for (const auto& a : finding.attributions) {
    auto tag = browser_tag_for_process(a.process_name);
    if (!tag.empty()) return tag;
  }
  return normalize_browser(session.browser);
}

std::size_t PresenceMatrix::yes_count() const {
  std::size_t n = 0;
  for (const auto& row : cells) n += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
  return n;
}

PresenceMatrix build_presence_matrix(const ImageManifest& manifest,
                                     std::span<const ImageFindings> per_image,
                                     std::span<const MatrixColumn> columns) {
  PresenceMatrix pm;
  pm.columns.assign(columns.begin(), columns.end());
  for (const auto& e : manifest.entries) pm.rows.push_back(e.label);
  pm.cells.assign(pm.rows.size(), std::vector<bool>(pm.columns.size(), false));
  for (const auto& img : per_image) {
    auto it = std::find(pm.rows.begin(), pm.rows.end(), img.label);
    if (it == pm.rows.end())
      throw Error(Errc::unknown_label, "findings for unknown image '" + img.label + "'");
    auto row = static_cast<std::size_t>(it - pm.rows.begin());
    for (const auto& f : img.findings) {
      if (!f.password_raw) continue;
      auto browser = finding_browser(f, manifest.session);
      for (std::size_t c = 0; c < pm.columns.size(); ++c) {
        if (pm.columns[c].app_id == f.app_id && pm.columns[c].browser == browser)
          pm.cells[row][c] = true;
      }
    }
  }
  return pm;
}

}  // namespace ramsift
