#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ramsift {

// Kernel-owned ranges use pid 0.
inline constexpr std::uint32_t kKernelPid = 0;

struct ProcessMapEntry {
  std::uint64_t phys_start = 0;
  std::uint64_t phys_end = 0;  // exclusive
  std::uint32_t pid = 0;
  std::string process_name;
  std::uint64_t virt_base = 0;

  friend bool operator==(const ProcessMapEntry&, const ProcessMapEntry&) = default;
};

struct Attribution {
  std::uint32_t pid = 0;
  std::string process_name;
  std::uint64_t virtual_address = 0;

  friend bool operator==(const Attribution&, const Attribution&) = default;
};

/// Physical-range -> process lookup. Entries are kept sorted by phys_start
/// (stable, so file order breaks ties); ranges may overlap.
class ProcessMap {
 public:
  ProcessMap() = default;
  explicit ProcessMap(std::vector<ProcessMapEntry> entries);

  const std::vector<ProcessMapEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  friend bool operator==(const ProcessMap&, const ProcessMap&) = default;

 private:
  std::vector<ProcessMapEntry> entries_;
  std::uint64_t max_length_ = 0;

  friend std::vector<Attribution> attribute(std::uint64_t offset, const ProcessMap& map);
};

/// `pid<TAB>name<TAB>phys_start<TAB>phys_end<TAB>virt_base`, addresses as
/// 0x-prefixed hex, `#` comments. Throws malformed_entry / inverted_range
/// naming the line.
ProcessMap load_process_map(std::istream& in);

void write_process_map(std::ostream& out, const ProcessMap& map);

/// Every entry covering offset, in map order. Empty when unmapped.
std::vector<Attribution> attribute(std::uint64_t offset, const ProcessMap& map);

}  // namespace ramsift
