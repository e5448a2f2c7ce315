#include "ramsift/attrib.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>

#include "ramsift/error.hpp"

namespace ramsift {

namespace {

bool parse_hex(const std::string& text, std::uint64_t& out) {
  if (text.size() < 3 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) return false;
  auto [ptr, ec] = std::from_chars(text.data() + 2, text.data() + text.size(), out, 16);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%08llX", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

ProcessMap::ProcessMap(std::vector<ProcessMapEntry> entries) : entries_(std::move(entries)) {
  std::stable_sort(entries_.begin(), entries_.end(),
                   [](const ProcessMapEntry& a, const ProcessMapEntry& b) {
                     return a.phys_start < b.phys_start;
                   });
  for (const auto& e : entries_) {
    max_length_ = std::max(max_length_, e.phys_end - e.phys_start);
  }
}

ProcessMap load_process_map(std::istream& in) {
  std::vector<ProcessMapEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fail = [&](Errc code, const std::string& what) {
      throw Error(code, "process map line " + std::to_string(line_no) + ": " + what);
    };
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5) fail(Errc::malformed_entry, "expected 5 tab-separated fields");

    ProcessMapEntry e;
    auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), e.pid);
    if (fields[0].empty() || ec != std::errc() || ptr != fields[0].data() + fields[0].size()) {
      fail(Errc::malformed_entry, "bad pid '" + fields[0] + "'");
    }
    e.process_name = fields[1];
    if (e.process_name.empty()) fail(Errc::malformed_entry, "empty process name");
    if (!parse_hex(fields[2], e.phys_start)) fail(Errc::malformed_entry, "bad phys_start");
    if (!parse_hex(fields[3], e.phys_end)) fail(Errc::malformed_entry, "bad phys_end");
    if (!parse_hex(fields[4], e.virt_base)) fail(Errc::malformed_entry, "bad virt_base");
    if (e.phys_start >= e.phys_end) fail(Errc::inverted_range, "phys_start >= phys_end");
    entries.push_back(std::move(e));
  }
  return ProcessMap(std::move(entries));
}

void write_process_map(std::ostream& out, const ProcessMap& map) {
  for (const auto& e : map.entries()) {
    out << e.pid << '\t' << e.process_name << '\t' << hex(e.phys_start) << '\t'
        << hex(e.phys_end) << '\t' << hex(e.virt_base) << '\n';
  }
}

std::vector<Attribution> attribute(std::uint64_t offset, const ProcessMap& map) {
  const auto& entries = map.entries_;
  // First entry starting after offset; candidates lie before it and start
  // no earlier than offset - max_length_.
  auto upper = std::upper_bound(entries.begin(), entries.end(), offset,
                                [](std::uint64_t off, const ProcessMapEntry& e) {
                                  return off < e.phys_start;
                                });
  std::uint64_t floor = offset >= map.max_length_ ? offset - map.max_length_ : 0;
  auto lower = std::lower_bound(entries.begin(), upper, floor,
                                [](const ProcessMapEntry& e, std::uint64_t f) {
                                  return e.phys_start < f;
                                });
  std::vector<Attribution> out;
  for (auto it = lower; it != upper; ++it) {
    if (offset < it->phys_end) {
      out.push_back(Attribution{it->pid, it->process_name,
                                it->virt_base + (offset - it->phys_start)});
    }
  }
  return out;
}

}  // namespace ramsift
