#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ramsift/attrib.hpp"
#include "ramsift/carver.hpp"
#include "ramsift/corpus.hpp"
#include "ramsift/decoder.hpp"
#include "ramsift/sigcat.hpp"

namespace ramsift {

enum class Confidence { high, low };

const char* confidence_name(Confidence c) noexcept;
std::optional<Confidence> parse_confidence(std::string_view name);

/// Case-insensitive match of an application name against the signature's
/// app id, display name, or family ("gmail" for "gmail-ff").
bool matches_application(const CredentialSignature& sig, std::string_view application);

struct ScanOptions {
  CarveOptions carve;
  /// Max gap between a key string's end and its value string (adjacent layout).
  std::uint64_t delta = 64;
  /// Half-width of the context window used for confidence and for pairing
  /// usernames with passwords.
  std::uint64_t window = 1024;
  KeyMatchOptions keys;
  /// Browser/application of the acquisition session, from the manifest.
  SessionMeta session;
};

void validate(const ScanOptions& options);

/// Where a finding's bytes live in the image; used to re-read evidence.
struct Evidence {
  std::optional<TextSpan> username_key;
  std::optional<TextSpan> username_value;
  std::optional<TextSpan> password_key;
  std::optional<TextSpan> password_value;
};

struct CredentialFinding {
  std::string app_id;
  std::string image_label;
  std::optional<std::string> username;
  std::optional<std::string> password_raw;
  std::optional<std::string> password_decoded;
  bool encrypted = false;
  MatchMode match_mode = MatchMode::inline_body;
  std::uint64_t offset = 0;
  std::string context_snippet;
  Confidence confidence = Confidence::low;
  std::vector<Attribution> attributions;
  Evidence evidence;  // not serialized

  /// Equality over the reported fields (evidence excluded).
  bool same_report(const CredentialFinding& other) const;
};

struct ScanStats {
  CarveStats carve;
  std::uint64_t strings = 0;
  std::uint64_t clusters = 0;
  /// Largest number of keyword events held at once.
  std::size_t peak_cluster_events = 0;
  /// Largest number of buffered context-URL hits.
  std::size_t peak_context_hits = 0;
};

/// HIGH iff a context URL of sig occurs at an image offset within
/// [offset - window, offset + window] in any of the given strings.
Confidence assign_confidence(std::uint64_t offset, std::span<const ExtractedString> context,
                             const CredentialSignature& sig, std::uint64_t window);

/// Carve -> pair/bind -> match -> arbitrate -> decode -> attribute, in one
/// streaming pass. Findings are sorted by (offset, app_id).
///
/// When several signatures claim the same key bytes, the candidates with the
/// best (confidence, number of recovered fields, session application) rank
/// are kept; exact ties are all reported.
std::vector<CredentialFinding> scan_image(const MemoryImage& image, const Catalog& catalog,
                                          const ScanOptions& options,
                                          const ProcessMap* map = nullptr,
                                          ScanStats* stats = nullptr);

/// Same pipeline over already-carved strings (offset order), without the
/// streaming cluster split. Used as a cross-check for scan_image.
std::vector<CredentialFinding> scan_strings(std::span<const ExtractedString> strings,
                                            const std::string& image_label,
                                            const Catalog& catalog, const ScanOptions& options,
                                            const ProcessMap* map = nullptr);

struct ImageFindings {
  std::string label;
  std::vector<CredentialFinding> findings;
};

struct MatrixColumn {
  std::string app_id;
  std::string browser;

  std::string name() const { return app_id + "/" + browser; }
  friend bool operator==(const MatrixColumn&, const MatrixColumn&) = default;
};

/// sonicwall, facebook, gmail-ff|gmail-gc, irctc, sbi; each as MF then GC.
std::vector<MatrixColumn> table1_columns();

/// Parses `app/browser,app/browser,...`.
std::vector<MatrixColumn> parse_columns(std::string_view spec);

/// "firefox.exe" -> "MF", "chrome.exe" -> "GC", otherwise empty.
std::string browser_tag_for_process(std::string_view process_name);

/// Maps free-text browser names ("Mozilla Firefox", "chrome", "GC") to tags.
std::string normalize_browser(std::string_view browser);

/// Browser tag for a finding: the first attributed browser process, else
/// the session's browser.
std::string finding_browser(const CredentialFinding& finding, const SessionMeta& session);

struct PresenceMatrix {
  std::vector<std::string> rows;
  std::vector<MatrixColumn> columns;
  std::vector<std::vector<bool>> cells;  // [row][column]

  bool at(std::size_t row, std::size_t column) const { return cells.at(row).at(column); }
  std::size_t yes_count() const;
  friend bool operator==(const PresenceMatrix&, const PresenceMatrix&) = default;
};

/// Cell is Yes iff some finding of that image, app and browser carries a
/// password (encrypted values count). Rows follow manifest order. Throws
/// unknown_label for findings of an image the manifest does not list.
PresenceMatrix build_presence_matrix(const ImageManifest& manifest,
                                     std::span<const ImageFindings> per_image,
                                     std::span<const MatrixColumn> columns);

}  // namespace ramsift
