#include "ramsift/error.hpp"

namespace ramsift {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::io_failure: return "IoFailure";
    case Errc::zero_size: return "ZeroSize";
    case Errc::missing_file: return "MissingFile";
    case Errc::duplicate_label: return "DuplicateLabel";
    case Errc::non_monotonic_step: return "NonMonotonicStep";
    case Errc::malformed_manifest: return "MalformedManifest";
    case Errc::malformed_line: return "MalformedLine";
    case Errc::malformed_entry: return "MalformedEntry";
    case Errc::inverted_range: return "InvertedRange";
    case Errc::malformed_catalog: return "MalformedCatalog";
    case Errc::unknown_label: return "UnknownLabel";
    case Errc::unknown_template: return "UnknownTemplate";
    case Errc::overlap: return "OverlapError";
    case Errc::placement_out_of_bounds: return "PlacementOutOfBounds";
    case Errc::malformed_plan: return "MalformedPlan";
    case Errc::malformed_report: return "MalformedReport";
    case Errc::invalid_options: return "InvalidOptions";
  }
  return "Unknown";
}

}  // namespace ramsift
