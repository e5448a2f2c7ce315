#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ramsift/corpus.hpp"
#include "ramsift/scanner.hpp"

namespace ramsift {

const char* tool_version() noexcept;

struct ScanReport {
  std::string version = tool_version();
  std::optional<std::string> generated_at;
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  /// Echo of the scanned manifest. Image paths are not reported.
  ImageManifest manifest;
  std::vector<ImageFindings> images;
  PresenceMatrix matrix;
};

nlohmann::ordered_json scan_options_json(const ScanOptions& options);

nlohmann::ordered_json finding_to_json(const CredentialFinding& f);
CredentialFinding finding_from_json(const nlohmann::ordered_json& j, const std::string& image_label);

nlohmann::ordered_json report_to_json(const ScanReport& report);
/// Throws malformed_report.
ScanReport report_from_json(const nlohmann::ordered_json& j);

void write_json_report(std::ostream& out, const ScanReport& report);
ScanReport read_json_report(std::istream& in);
ScanReport load_json_report(const std::filesystem::path& path);

/// One tab-separated `finding` line per finding followed by the matrix table.
void write_text_report(std::ostream& out, const ScanReport& report);
/// Recovers findings from `finding` lines; other lines are ignored.
std::vector<ImageFindings> parse_text_findings(std::istream& in);

std::string render_matrix_table(const PresenceMatrix& matrix);

/// Rows come from the first matrix; columns are the union in first-seen
/// order; cells are OR-ed. A row missing from the first matrix throws
/// unknown_label.
PresenceMatrix merge_matrices(std::span<const PresenceMatrix> matrices);

/// Current UTC time as ISO 8601.
std::string utc_timestamp();

}  // namespace ramsift
