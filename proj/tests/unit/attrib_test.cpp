#include <random>
#include <sstream>

#include "../support/testing.hpp"
#include "ramsift/attrib.hpp"

using namespace ramsift;

namespace {

ProcessMap parse(const std::string& text) {
  std::istringstream in(text);
  return load_process_map(in);
}

std::vector<Attribution> linear(std::uint64_t offset, const ProcessMap& map) {
  std::vector<Attribution> out;
  for (const auto& e : map.entries())
    if (e.phys_start <= offset && offset < e.phys_end)
      out.push_back({e.pid, e.process_name, e.virt_base + (offset - e.phys_start)});
  return out;
}

}  // namespace

TEST_CASE("single firefox range") {
  auto map = parse("1532\tfirefox.exe\t0x0F5C0000\t0x0F600000\t0x00400000\n");
  REQUIRE(map.entries().size() == 1);
  CHECK(map.entries()[0].pid == 1532);
  auto hits = attribute(0x0F5C0000 + 0x1234, map);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0] == Attribution{1532, "firefox.exe", 0x00401234});
  CHECK(attribute(0x0F600000, map).empty());
  CHECK(attribute(0x0F5BFFFF, map).empty());
  CHECK(attribute(0x0F5FFFFF, map).size() == 1);
}

TEST_CASE("empty map file") {
  CHECK(parse("").empty());
  CHECK(parse("# only a comment\n\n").empty());
  CHECK(attribute(12, ProcessMap{}).empty());
}

TEST_CASE("overlapping ranges return every owner in map order") {
  auto map = parse(
      "2216\tchrome.exe\t0x1000\t0x3000\t0x400000\n"
      "0\tkernel\t0x0800\t0x2000\t0x80000000\n"
      "1044\tsvchost.exe\t0x1000\t0x1800\t0x10000\n");
  auto hits = attribute(0x1200, map);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].process_name == "kernel");
  CHECK(hits[0].pid == kKernelPid);
  CHECK(hits[1].process_name == "chrome.exe");
  CHECK(hits[2].process_name == "svchost.exe");
  CHECK(hits == linear(0x1200, map));
}

TEST_CASE("lookup agrees with a linear scan on random maps") {
  std::mt19937_64 rng(2024);
  for (int m = 0; m < 200; ++m) {
    std::vector<ProcessMapEntry> entries;
    std::size_t n = rng() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t start = rng() % 100000;
      std::uint64_t len = 1 + rng() % (m % 2 ? 50000 : 500);
      entries.push_back({start, start + len, static_cast<std::uint32_t>(rng() % 5000),
                         "p" + std::to_string(i), rng() % 0x10000000});
    }
    ProcessMap map(entries);
    for (int q = 0; q < 300; ++q) {
      std::uint64_t off = rng() % 160000;
      auto got = attribute(off, map);
      CHECK(got == linear(off, map));
    }
  }
}

TEST_CASE("map errors name the line") {
  try {
    parse("1\ta\t0x10\t0x20\t0x0\n2\tb\t0x10\n");
    FAIL("expected MalformedEntry");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_entry);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_ERRC(parse("1\ta\t0x30\t0x20\t0x0\n"), Errc::inverted_range);
  CHECK_ERRC(parse("1\ta\t0x20\t0x20\t0x0\n"), Errc::inverted_range);
  CHECK_ERRC(parse("x\ta\t0x10\t0x20\t0x0\n"), Errc::malformed_entry);
  CHECK_ERRC(parse("1\t\t0x10\t0x20\t0x0\n"), Errc::malformed_entry);
  CHECK_ERRC(parse("1\ta\t16\t0x20\t0x0\n"), Errc::malformed_entry);
}

TEST_CASE("map round trip") {
  ProcessMap map({{0x2000, 0x3000, 2216, "chrome.exe", 0x01000000},
                  {0x1000, 0x5000, 0, "kernel", 0x80000000},
                  {0x2000, 0x2800, 1532, "firefox.exe", 0x01100000}});
  std::ostringstream out;
  write_process_map(out, map);
  CHECK(parse(out.str()) == map);
  CHECK(map.entries().front().phys_start == 0x1000);
}
