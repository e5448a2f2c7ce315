#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ramsift/attrib.hpp"
#include "ramsift/corpus.hpp"
#include "ramsift/scanner.hpp"
#include "ramsift/sigcat.hpp"

namespace ramsift {

enum class Layout { inline_body, adjacent, cookie };

const char* layout_name(Layout l) noexcept;

struct TextBlock {
  std::uint64_t rel_offset = 0;
  std::string text;
};

/// What a correct scan reports for one placement of a template.
struct ExpectedFinding {
  std::string app_id;
  std::optional<std::string> username;
  std::optional<std::string> password_raw;
  std::optional<std::string> password_decoded;
  bool encrypted = false;
  MatchMode match_mode = MatchMode::inline_body;
  std::uint64_t rel_offset = 0;
  Confidence confidence = Confidence::low;
  std::string context_snippet;
  // Findings sharing a nonzero group tie on rank; the session application
  // decides which of them survive.
  int tie_group = 0;
};

struct ArtifactTemplate {
  std::string template_id;
  std::string app_id;
  Layout layout = Layout::inline_body;
  std::vector<TextBlock> blocks;
  std::optional<std::string> planted_username;
  std::optional<std::string> planted_password_raw;
  std::string default_process;
  std::vector<ExpectedFinding> expected;

  std::uint64_t footprint() const;
};

/// NUL bytes kept free around every placement.
inline constexpr std::uint64_t kGuardBytes = 8;

const std::vector<ArtifactTemplate>& builtin_templates();
const ArtifactTemplate* find_template(std::string_view id);

/// Bytes of the template as laid out in memory (gaps are NUL).
std::vector<std::uint8_t> render_template(const ArtifactTemplate& t);

struct Placement {
  std::string template_id;
  std::uint64_t offset = 0;
  /// Owning processes, in map order. Empty means the template default.
  std::vector<std::string> processes;
};

struct PlannedImage {
  std::string label;
  std::int64_t step_index = 0;
  std::string step_description;
  std::vector<Placement> placements;
};

struct FabricationPlan {
  std::uint64_t image_size = 0;
  std::uint64_t seed = 0;
  double printable_density = 0.3;
  /// 0 fills the whole image; otherwise only this many bytes around each
  /// placement get filler and the rest stays zero.
  std::uint64_t filler_radius = 0;
  SessionMeta session;
  std::vector<PlannedImage> images;
};

/// Throws malformed_plan, overlap (naming both placements) or
/// placement_out_of_bounds.
void validate_plan(const FabricationPlan& plan);

FabricationPlan parse_plan(std::istream& in);
FabricationPlan load_plan(const std::filesystem::path& path);
void write_plan(std::ostream& out, const FabricationPlan& plan);

/// The 13-image acquisition timeline with its reference Yes/No pattern.
FabricationPlan table1_preset(std::uint64_t image_size = std::uint64_t{16} << 20,
                              std::uint64_t seed = 2011);

/// Banned filler substrings: every catalog key, context URL and cookie marker.
std::vector<std::string> banned_filler_patterns(const Catalog& catalog);

/// Generates the bytes of one image into out (streamed in chunks).
void write_image(const FabricationPlan& plan, std::size_t image_index, std::ostream& out);

ProcessMap plan_process_map(const FabricationPlan& plan, std::size_t image_index);

/// Expected findings per image, in the scanner's sort order.
std::vector<ImageFindings> ground_truth(const FabricationPlan& plan);

struct FabricationResult {
  std::filesystem::path manifest_path;
  std::vector<std::filesystem::path> image_paths;
  std::vector<std::filesystem::path> map_paths;
  std::filesystem::path ground_truth_path;
  std::vector<ImageFindings> truth;
};

/// Writes <label>.img, <label>.pmap, manifest.tsv, ground_truth.json and
/// plan.json into out_dir.
FabricationResult fabricate(const FabricationPlan& plan, const std::filesystem::path& out_dir);

}  // namespace ramsift
