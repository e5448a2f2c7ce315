// Prints one PASS/FAIL line per acceptance criterion; exit status is nonzero
// if any criterion fails.

#include <sys/resource.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "../support/oracle.hpp"
#include "ramsift/cli.hpp"
#include "ramsift/decoder.hpp"
#include "ramsift/fabricator.hpp"
#include "ramsift/report.hpp"
#include "ramsift/scanner.hpp"

using namespace ramsift;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kFixtureSeconds = 1.0;
constexpr double kTable1Seconds = 60.0;
constexpr double kCarverSeconds = 30.0;
constexpr double kEndToEndSeconds = 60.0;
constexpr std::uint64_t kFullSize = std::uint64_t{512} << 20;
constexpr long kScaleRssKiB = 128 * 1024;
constexpr std::size_t kScalePendingBytes = 8 * 4096;
constexpr std::size_t kScaleClusterEvents = 1024;
constexpr std::size_t kScaleContextHits = 1024;

struct Result {
  bool pass = true;
  std::string detail;
};

// Collects mismatch notes; keeps the first few.
struct Checker {
  Result& r;
  int notes = 0;
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    r.pass = false;
    if (notes++ < 5) r.detail += (r.detail.empty() ? "" : "; ") + what;
  }
};

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string opt(const std::optional<std::string>& s) { return s ? "'" + *s + "'" : "none"; }

bool same_findings(const std::vector<CredentialFinding>& a, const std::vector<CredentialFinding>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_report(b[i])) return false;
  return true;
}

Result decode_vectors() {
  Result r;
  Checker c{r};
  c.expect(percent_decode("who678%2C%3B") == "who678,;", "who678%2C%3B");
  c.expect(percent_decode("abc*%21123") == "abc*!123", "abc*%21123");
  if (r.pass) r.detail = "2/2 vectors";
  return r;
}

struct Fixture {
  std::string name;
  std::string template_id;
  std::uint64_t base;
  std::string process;
  std::string application;
  // Expected values.
  std::string app_id;
  std::optional<std::string> username;
  std::optional<std::string> password_raw;
  std::optional<std::string> password_decoded;
  bool encrypted;
  MatchMode mode;
  Confidence confidence;
  // Offset of the key that anchors the finding; 0 means "read it back".
  std::uint64_t key_offset;
  std::string key;
};

std::uint64_t at_after(std::uint64_t line_offset, std::string_view line, std::string_view key) {
  return line_offset + line.find(key);
}

std::vector<Fixture> fixtures() {
  const std::uint64_t sonic_pass = at_after(
      257729038,
      "param1=&param2=93BF844DF6D46F0F1453F46441968A46&sessId=523518834&id=a4&select=English"
      "&uName=306110003&pass=Nitt500&digest=",
      "pass=");
  const std::uint64_t gmail_pass = at_after(
      377402539,
      "Location: https://accounts.google.co.in/accounts/SetSID?ssdc=1&sidt=AlWU2cs%2F1jKI0%2Bfe"
      "R3yEy22NCywE05YSVI&Passwd=abc*%21123",
      "Passwd=");
  const std::uint64_t irctc_pass =
      at_after(366702348, "n=home&userName=ipsita689&password=durga21&button=Login", "password=");
  return {
      {"sonicwall/MF", "sonicwall-inline", 257728512, "firefox.exe", "", "sonicwall", "306110003",
       "Nitt500", "Nitt500", false, MatchMode::inline_body, Confidence::high, sonic_pass, "pass"},
      {"facebook/MF", "facebook-ff-inline", 301989888, "firefox.exe", "", "facebook",
       "ipsita.chinky@gmail.com", "who678%2C%3B", "who678,;", false, MatchMode::inline_body,
       Confidence::high, 0, "pass"},
      {"facebook/GC", "facebook-gc-adjacent", 327658412, "chrome.exe", "", "facebook",
       "ipsita.chinky@gmail.com", "berham!19", "berham!19", false, MatchMode::adjacent,
       Confidence::high, 327658960, "pass"},
      {"gmail/MF", "gmail-ff-cookie", 377401745, "firefox.exe", "", "gmail-ff",
       "ipsita.chinky@gmail.com", "abc*%21123", "abc*!123", false, MatchMode::inline_body,
       Confidence::high, gmail_pass, "Passwd"},
      {"irctc/GC", "irctc-inline", 366701369, "chrome.exe", "", "irctc", "ipsita689", "durga21",
       "durga21", false, MatchMode::inline_body, Confidence::high, irctc_pass, "password"},
      {"sbi/GC", "sbi-gc-inline", 419430400, "chrome.exe", "", "sbi", "ipsita_m",
       "37f08c5d00de89cb3c26e50200ee7242", std::nullopt, true, MatchMode::inline_body,
       Confidence::high, 0, "password"},
      {"sbi/MF", "sbi-ff-isolated", 452984832, "firefox.exe", "SBI", "sbi", "ipsita_m", std::nullopt,
       std::nullopt, false, MatchMode::inline_body, Confidence::low, 0, "userName"},
  };
}

Result known_fixtures(const fs::path& work) {
  Result r;
  Checker c{r};
  double worst = 0;
  for (const auto& fx : fixtures()) {
    FabricationPlan plan;
    plan.image_size = kFullSize;
    plan.seed = 42;
    plan.filler_radius = 64 * 1024;
    plan.session.application = fx.application;
    plan.images = {{"fixture", 1, fx.name, {{fx.template_id, fx.base, {fx.process}}}}};
    auto dir = work / "fixture";
    fs::remove_all(dir);
    auto fab = fabricate(plan, dir);
    auto manifest = load_manifest(fab.manifest_path);
    std::ifstream pm(fab.map_paths[0]);
    auto map = load_process_map(pm);
    auto image = open_image(manifest.entries[0]);

    ScanOptions options;
    options.session = manifest.session;
    auto start = Clock::now();
    auto found = scan_image(image, builtin_catalog(), options, &map);
    double took = seconds_since(start);
    worst = std::max(worst, took);
    c.expect(took < kFixtureSeconds, fx.name + " took " + fmt(took) + " s");

    c.expect(found.size() == 1, fx.name + ": " + std::to_string(found.size()) + " findings");
    if (found.size() != 1) continue;
    const auto& f = found[0];
    c.expect(f.app_id == fx.app_id, fx.name + ": app " + f.app_id);
    c.expect(f.username == fx.username, fx.name + ": username " + opt(f.username));
    c.expect(f.password_raw == fx.password_raw, fx.name + ": password_raw " + opt(f.password_raw));
    c.expect(f.password_decoded == fx.password_decoded, fx.name + ": password " + opt(f.password_decoded));
    c.expect(f.encrypted == fx.encrypted, fx.name + ": encrypted flag");
    c.expect(f.match_mode == fx.mode, fx.name + ": match mode");
    c.expect(f.confidence == fx.confidence, fx.name + ": confidence " + confidence_name(f.confidence));
    if (fx.key_offset) c.expect(f.offset == fx.key_offset, fx.name + ": offset " + std::to_string(f.offset));
    auto key = image.read_range(f.offset, fx.key.size());
    c.expect(std::string(key.begin(), key.end()) == fx.key, fx.name + ": offset does not hold the key");
    c.expect(!f.attributions.empty() && f.attributions[0].process_name == fx.process,
             fx.name + ": attribution");
    fs::remove_all(dir);
  }
  if (r.pass) r.detail = "7 fixtures, slowest scan " + fmt(worst) + " s";
  return r;
}

Result table1(const fs::path& work) {
  Result r;
  Checker c{r};
  static const char* expected_cells[13] = {
      "NNNNNNNNNN", "NNNNNNNNNN", "YYNNNNNNNN", "YYYYYYYYNY", "YYYYYYYYNY",
      "YYYYYYYYNY", "YYYNYNYYNY", "YYYNYNYYNN", "YYYNYNYYNN", "NNNNNNNNNN",
      "NNNNNNNNNN", "NNNNNNNNNN", "NNNNNNNNNN"};
  auto dir = work / "table1";
  fs::remove_all(dir);
  auto start = Clock::now();
  auto fab = fabricate(table1_preset(), dir);
  auto manifest = load_manifest(fab.manifest_path);
  std::vector<ImageFindings> per_image;
  ScanOptions options;
  options.session = manifest.session;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    std::ifstream pm(fab.map_paths[i]);
    auto map = load_process_map(pm);
    per_image.push_back({manifest.entries[i].label,
                         scan_image(open_image(manifest.entries[i]), builtin_catalog(), options, &map)});
  }
  auto columns = table1_columns();
  auto matrix = build_presence_matrix(manifest, per_image, columns);
  double took = seconds_since(start);

  c.expect(matrix.rows.size() == 13 && matrix.columns.size() == 10, "matrix shape");
  std::size_t agree = 0;
  for (std::size_t row = 0; row < 13 && row < matrix.rows.size(); ++row) {
    c.expect(matrix.rows[row] == "Img" + std::to_string(row + 1), "row " + matrix.rows[row]);
    for (std::size_t col = 0; col < 10 && col < matrix.columns.size(); ++col) {
      bool want = expected_cells[row][col] == 'Y';
      if (matrix.at(row, col) == want) ++agree;
      else c.expect(false, matrix.rows[row] + " " + matrix.columns[col].name());
    }
  }
  c.expect(agree == 130, std::to_string(agree) + "/130 cells agree");
  c.expect(took < kTable1Seconds, "took " + fmt(took) + " s");
  fs::remove_all(dir);
  if (r.pass) r.detail = "130/130 cells, " + fmt(took) + " s";
  return r;
}

Result carver_oracle() {
  Result r;
  Checker c{r};
  const double densities[] = {0.1, 0.3, 0.7};
  const std::size_t chunks[] = {4096, 65536, std::size_t{1} << 20};
  std::mt19937_64 rng(20110823);
  auto start = Clock::now();
  std::size_t compared = 0;
  for (int i = 0; i < 1000; ++i) {
    auto bytes = oracle::random_buffer(rng, 65536, densities[i % 3]);
    auto want = oracle::brute_force_carve(bytes, 4, 4096, true, true);
    auto image = MemoryImage::from_bytes(bytes, "buf");
    for (auto chunk : chunks) {
      CarveOptions options;
      options.chunk_size = chunk;
      std::vector<ExtractedString> got;
      carve_strings(image, options, [&](ExtractedString&& s) { got.push_back(std::move(s)); });
      c.expect(oracle::from_carver(got) == want,
               "buffer " + std::to_string(i) + " chunk " + std::to_string(chunk));
      ++compared;
    }
  }
  double took = seconds_since(start);
  c.expect(took < kCarverSeconds, "took " + fmt(took) + " s");
  if (r.pass) r.detail = std::to_string(compared) + " carves equal, " + fmt(took) + " s";
  return r;
}

FabricationPlan random_plan(std::mt19937_64& rng, int index) {
  const auto& templates = builtin_templates();
  const double densities[] = {0.1, 0.3, 0.7};
  const char* processes[] = {"firefox.exe", "chrome.exe", "svchost.exe", "kernel"};
  FabricationPlan plan;
  plan.image_size = std::uint64_t{2} << 20;
  plan.seed = rng();
  plan.printable_density = densities[rng() % 3];
  if (rng() % 2) plan.session.application = "SBI";
  const std::uint64_t slots = plan.image_size / 65536;
  for (int img = 0; img < 2; ++img) {
    PlannedImage pi;
    pi.label = "P" + std::to_string(index) + "_" + std::to_string(img);
    pi.step_index = img;
    for (std::uint64_t slot = 0; slot < slots; ++slot) {
      if (rng() % 2) continue;
      Placement p;
      p.template_id = templates[rng() % templates.size()].template_id;
      p.offset = slot * 65536 + kGuardBytes + rng() % 32768;
      for (int k = static_cast<int>(rng() % 3); k > 0; --k) p.processes.push_back(processes[rng() % 4]);
      pi.placements.push_back(std::move(p));
    }
    plan.images.push_back(std::move(pi));
  }
  return plan;
}

Result end_to_end() {
  Result r;
  Checker c{r};
  std::mt19937_64 rng(1314111157);
  auto start = Clock::now();
  std::size_t findings = 0;
  for (int p = 0; p < 20; ++p) {
    auto plan = random_plan(rng, p);
    validate_plan(plan);
    auto truth = ground_truth(plan);
    for (std::size_t i = 0; i < plan.images.size(); ++i) {
      std::ostringstream bytes;
      write_image(plan, i, bytes);
      auto s = bytes.str();
      auto image = MemoryImage::from_bytes({s.begin(), s.end()}, plan.images[i].label);
      auto map = plan_process_map(plan, i);
      ScanOptions options;
      options.session = plan.session;
      auto got = scan_image(image, builtin_catalog(), options, &map);
      findings += truth[i].findings.size();
      c.expect(same_findings(got, truth[i].findings),
               plan.images[i].label + ": " + std::to_string(got.size()) + " findings vs " +
                   std::to_string(truth[i].findings.size()) + " expected");
    }
  }
  double took = seconds_since(start);
  c.expect(took < kEndToEndSeconds, "took " + fmt(took) + " s");
  if (r.pass) r.detail = "20 plans, " + std::to_string(findings) + " findings, " + fmt(took) + " s";
  return r;
}

Result determinism(const fs::path& work) {
  Result r;
  Checker c{r};
  auto dir = work / "determinism";
  fs::remove_all(dir);
  std::ostringstream sink, err;
  int code = run({"fabricate", "--preset", "table1", "--out", (dir / "corpus").string(), "--image-size",
                  "4194304"},
                 sink, err);
  c.expect(code == kExitOk, "fabricate failed: " + err.str());
  std::string outputs[2];
  for (int k = 0; k < 2; ++k) {
    auto path = dir / ("run" + std::to_string(k) + ".json");
    code = run({"scan", (dir / "corpus" / "manifest.tsv").string(), "--process-map",
                (dir / "corpus" / "{label}.pmap").string(), "--deterministic", "-o", path.string()},
               sink, err);
    c.expect(code == kExitOk, "scan failed: " + err.str());
    std::ifstream in(path, std::ios::binary);
    outputs[k].assign(std::istreambuf_iterator<char>(in), {});
  }
  c.expect(!outputs[0].empty() && outputs[0] == outputs[1], "reports differ");
  fs::remove_all(dir);
  if (r.pass) r.detail = std::to_string(outputs[0].size()) + " identical bytes";
  return r;
}

long max_rss_kib() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;
}

Result scale(const fs::path& work) {
  Result r;
  Checker c{r};
  auto dir = work / "scale";
  fs::remove_all(dir);
  FabricationPlan plan;
  plan.image_size = kFullSize;
  plan.seed = 7;
  plan.printable_density = 0.3;
  plan.images = {{"Big", 1, "dense", {}}};
  // Img5 of the table1 preset, scaled to the full image.
  plan.images[0].placements = table1_preset(kFullSize).images[4].placements;
  auto fab = fabricate(plan, dir);
  auto manifest = load_manifest(fab.manifest_path);
  std::ifstream pm(fab.map_paths[0]);
  auto map = load_process_map(pm);

  ScanOptions options;
  ScanStats stats;
  auto start = Clock::now();
  auto found = scan_image(open_image(manifest.entries[0]), builtin_catalog(), options, &map, &stats);
  double took = seconds_since(start);
  long rss = max_rss_kib();

  c.expect(stats.carve.bytes_read == kFullSize, "single pass read " + std::to_string(stats.carve.bytes_read));
  c.expect(stats.carve.chunk_buffer_bytes == options.carve.chunk_size, "chunk buffer");
  c.expect(stats.carve.peak_pending_bytes <= kScalePendingBytes,
           "pending " + std::to_string(stats.carve.peak_pending_bytes));
  c.expect(stats.peak_cluster_events <= kScaleClusterEvents,
           "cluster events " + std::to_string(stats.peak_cluster_events));
  c.expect(stats.peak_context_hits <= kScaleContextHits,
           "context hits " + std::to_string(stats.peak_context_hits));
  c.expect(rss <= kScaleRssKiB, "max rss " + std::to_string(rss) + " KiB");
  c.expect(same_findings(found, fab.truth[0].findings), "findings differ from ground truth");
  fs::remove_all(dir);
  r.detail += std::string(r.detail.empty() ? "" : "; ") + "512 MiB in " + fmt(took) + " s, " +
              std::to_string(stats.strings) + " strings, pending " +
              std::to_string(stats.carve.peak_pending_bytes) + " B, cluster events " +
              std::to_string(stats.peak_cluster_events) + ", max rss " + std::to_string(rss / 1024) +
              " MiB";
  return r;
}

}  // namespace

int main() {
  auto work = oracle::scratch_dir("acceptance");
  std::vector<std::pair<std::string, std::function<Result()>>> criteria = {
      // Run first so the resident-set measurement is not inflated by the others.
      {"7 scale", [&] { return scale(work); }},
      {"1 decode vectors", decode_vectors},
      {"2 known-credential fixtures", [&] { return known_fixtures(work); }},
      {"3 table1 matrix", [&] { return table1(work); }},
      {"4 carver oracle", carver_oracle},
      {"5 end-to-end oracle", end_to_end},
      {"6 determinism", [&] { return determinism(work); }},
  };
  std::vector<std::pair<std::string, Result>> results;
  for (auto& [name, fn] : criteria) {
    Result res;
    try {
      res = fn();
    } catch (const std::exception& e) {
      res = {false, std::string("exception: ") + e.what()};
    }
    results.emplace_back(name, res);
  }
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int failed = 0;
  for (const auto& [name, res] : results) {
    std::cout << (res.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << res.detail << '\n';
    if (!res.pass) ++failed;
  }
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
