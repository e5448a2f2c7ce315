#pragma once

#include <stdexcept>
#include <string>

namespace ramsift {

enum class Errc {
  io_failure,
  zero_size,
  missing_file,
  duplicate_label,
  non_monotonic_step,
  malformed_manifest,
  malformed_line,
  malformed_entry,
  inverted_range,
  malformed_catalog,
  unknown_label,
  unknown_template,
  overlap,
  placement_out_of_bounds,
  malformed_plan,
  malformed_report,
  invalid_options,
};

const char* errc_name(Errc code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ramsift
