#include "ramsift/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ramsift/attrib.hpp"
#include "ramsift/carver.hpp"
#include "ramsift/corpus.hpp"
#include "ramsift/error.hpp"
#include "ramsift/fabricator.hpp"
#include "ramsift/report.hpp"
#include "ramsift/scanner.hpp"
#include "ramsift/sigcat.hpp"

namespace ramsift {

namespace {

namespace fs = std::filesystem;

EncodingSet parse_encodings(const std::string& spec) {
  EncodingSet set{false, false};
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "ascii") set.ascii = true;
    else if (item == "utf16le" || item == "utf16") set.utf16le = true;
    else throw Error(Errc::invalid_options, "unknown encoding '" + item + "'");
  }
  if (set.empty()) throw Error(Errc::invalid_options, "no encodings selected");
  return set;
}

std::uint64_t parse_offset(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) {
      v = std::stoull(s.substr(2), &used, 16);
      used += 2;
    } else {
      v = std::stoull(s, &used, 10);
    }
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || s.front() == '-')
    throw Error(Errc::invalid_options, "bad offset '" + s + "'");
  return v;
}

// Writes to -o FILE when given, otherwise to the command's stdout.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : stream_(&fallback), path_(path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(Errc::io_failure, "cannot write " + path);
      stream_ = &file_;
    }
  }
  std::ostream& get() { return *stream_; }
  void close() {
    stream_->flush();
    if (!*stream_) throw Error(Errc::io_failure, "write failed" + (path_.empty() ? "" : ": " + path_));
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
  std::string path_;
};

std::string replace_label(std::string pattern, const std::string& label) {
  const std::string token = "{label}";
  for (auto pos = pattern.find(token); pos != std::string::npos; pos = pattern.find(token, pos + label.size()))
    pattern.replace(pos, token.size(), label);
  return pattern;
}

ProcessMap read_map(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open process map " + path.string());
  try {
    return load_process_map(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

struct StringsArgs {
  std::string image;
  std::size_t min_len = 4;
  std::size_t max_len = 4096;
  std::string encodings = "ascii,utf16le";
  std::string output;
};

int cmd_strings(const StringsArgs& a, std::ostream& out) {
  CarveOptions opt;
  opt.min_len = a.min_len;
  opt.max_len = a.max_len;
  opt.encodings = parse_encodings(a.encodings);
  validate(opt);
  auto image = MemoryImage::from_file(a.image, fs::path(a.image).stem().string());
  Output o(a.output, out);
  StringsFileWriter writer(o.get());
  carve_strings(image, opt, [&](ExtractedString&& s) { writer.write(s); });
  o.close();
  return kExitOk;
}

struct ScanArgs {
  std::string input;
  std::string catalog;
  std::string process_map;
  std::size_t min_len = 4;
  std::size_t max_len = 4096;
  std::string encodings = "ascii,utf16le";
  std::uint64_t delta = 64;
  std::uint64_t window = 1024;
  bool deterministic = false;
  std::string format = "json";
  std::string columns;
  bool case_insensitive = false;
  std::string browser;
  std::string application;
  std::string output;
  unsigned jobs = 1;
};

int cmd_scan(const ScanArgs& a, std::ostream& out) {
  ScanOptions opt;
  opt.carve.min_len = a.min_len;
  opt.carve.max_len = a.max_len;
  opt.carve.encodings = parse_encodings(a.encodings);
  opt.delta = a.delta;
  opt.window = a.window;
  opt.keys.case_insensitive = a.case_insensitive;
  validate(opt);

  Catalog catalog = builtin_catalog();
  if (!a.catalog.empty()) {
    std::ifstream in(a.catalog);
    if (!in) throw Error(Errc::missing_file, "cannot open catalog " + a.catalog);
    catalog = load_catalog_overrides(in, std::move(catalog));
  }
  validate_catalog(catalog);

  ImageManifest manifest;
  fs::path input(a.input);
  if (input.extension() == ".tsv") {
    manifest = load_manifest(input);
  } else {
    if (!fs::exists(input)) throw Error(Errc::missing_file, "image not found: " + a.input);
    manifest.entries.push_back({input.stem().string(), 0, "", input});
  }
  if (!a.browser.empty()) manifest.session.browser = a.browser;
  if (!a.application.empty()) manifest.session.application = a.application;
  opt.session = manifest.session;

  auto columns = a.columns.empty() ? table1_columns() : parse_columns(a.columns);

  // Load every map up front so a bad map fails before any scanning.
  std::vector<std::optional<ProcessMap>> maps(manifest.entries.size());
  if (!a.process_map.empty()) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i)
      maps[i] = read_map(replace_label(a.process_map, manifest.entries[i].label));
  }

  std::vector<ImageFindings> results(manifest.entries.size());
  std::vector<std::exception_ptr> errors(manifest.entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < manifest.entries.size(); i = next++) {
      try {
        const auto& e = manifest.entries[i];
        auto image = open_image(e);
        results[i] = {e.label, scan_image(image, catalog, opt, maps[i] ? &*maps[i] : nullptr)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned jobs = std::max(1u, std::min<unsigned>(a.jobs, static_cast<unsigned>(manifest.entries.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ScanReport report;
  if (!a.deterministic) report.generated_at = utc_timestamp();
  report.options = scan_options_json(opt);
  report.options["catalog"] = a.catalog.empty() ? "builtin" : a.catalog;
  report.options["process_map"] =
      a.process_map.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(a.process_map);
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (const auto& c : columns) cols.push_back(c.name());
  report.options["columns"] = cols;
  report.manifest = manifest;
  report.images = std::move(results);
  report.matrix = build_presence_matrix(manifest, report.images, columns);

  Output o(a.output, out);
  if (a.format == "text") write_text_report(o.get(), report);
  else write_json_report(o.get(), report);
  o.close();
  return kExitOk;
}

struct MatrixArgs {
  std::vector<std::string> reports;
  std::string columns;
  std::string output;
};

int cmd_matrix(const MatrixArgs& a, std::ostream& out) {
  std::vector<PresenceMatrix> matrices;
  for (const auto& path : a.reports) {
    auto r = load_json_report(path);
    for (const auto& img : r.images) {
      if (std::find(r.matrix.rows.begin(), r.matrix.rows.end(), img.label) == r.matrix.rows.end())
        throw Error(Errc::unknown_label, path + ": image '" + img.label + "' has no matrix row");
    }
    matrices.push_back(std::move(r.matrix));
  }
  PresenceMatrix merged = merge_matrices(matrices);
  if (matrices.empty() || !a.columns.empty()) {
    auto columns = a.columns.empty() ? table1_columns() : parse_columns(a.columns);
    PresenceMatrix projected;
    projected.rows = merged.rows;
    projected.columns = columns;
    projected.cells.assign(projected.rows.size(), std::vector<bool>(columns.size(), false));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      auto it = std::find(merged.columns.begin(), merged.columns.end(), columns[c]);
      if (it == merged.columns.end()) continue;
      auto src = static_cast<std::size_t>(it - merged.columns.begin());
      for (std::size_t r = 0; r < projected.rows.size(); ++r) projected.cells[r][c] = merged.cells[r][src];
    }
    merged = std::move(projected);
  }
  Output o(a.output, out);
  o.get() << render_matrix_table(merged);
  o.close();
  return kExitOk;
}

struct FabricateArgs {
  std::string plan;
  std::string preset;
  std::string out_dir;
  std::uint64_t image_size = 0;
  bool full_size = false;
  std::optional<std::uint64_t> seed;
};

int cmd_fabricate(const FabricateArgs& a, std::ostream& out) {
  FabricationPlan plan;
  if (!a.preset.empty()) {
    if (a.preset != "table1") throw Error(Errc::invalid_options, "unknown preset '" + a.preset + "'");
    std::uint64_t size = std::uint64_t{16} << 20;
    if (a.full_size) size = std::uint64_t{512} << 20;
    if (a.image_size) size = a.image_size;
    plan = table1_preset(size);
  } else if (!a.plan.empty()) {
    plan = load_plan(a.plan);
    if (a.image_size) plan.image_size = a.image_size;
  } else {
    throw Error(Errc::invalid_options, "fabricate needs a plan file or --preset");
  }
  if (a.seed) plan.seed = *a.seed;
  validate_plan(plan);
  auto result = fabricate(plan, a.out_dir);
  std::size_t expected = 0;
  for (const auto& img : result.truth) expected += img.findings.size();
  out << "wrote " << result.image_paths.size() << " images (" << plan.image_size
      << " bytes each) to " << a.out_dir << '\n'
      << "manifest: " << result.manifest_path.string() << '\n'
      << "ground truth: " << result.ground_truth_path.string() << " (" << expected
      << " findings)\n";
  return kExitOk;
}

struct AttributeArgs {
  std::string process_map;
  std::vector<std::string> offsets;
};

int cmd_attribute(const AttributeArgs& a, std::ostream& out) {
  auto map = read_map(a.process_map);
  std::vector<std::uint64_t> offsets;
  for (const auto& s : a.offsets) offsets.push_back(parse_offset(s));
  for (auto off : offsets) {
    auto hits = attribute(off, map);
    if (hits.empty()) {
      out << off << "\t-\n";
      continue;
    }
    for (const auto& h : hits) {
      char va[24];
      std::snprintf(va, sizeof va, "0x%08llX", static_cast<unsigned long long>(h.virtual_address));
      out << off << '\t' << h.pid << '\t' << h.process_name << '\t' << va << '\n';
    }
  }
  return kExitOk;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ramsift: carve memory images for login credentials", "ramsift"};
  app.set_version_flag("--version", std::string("ramsift ") + tool_version());
  app.require_subcommand(1);

  StringsArgs sa;
  auto* strings = app.add_subcommand("strings", "print printable strings as <offset>:<text>");
  strings->add_option("image", sa.image, "memory image")->required();
  strings->add_option("--min-len", sa.min_len, "shortest run to report")->capture_default_str();
  strings->add_option("--max-len", sa.max_len, "split runs longer than this")->capture_default_str();
  strings->add_option("--encodings", sa.encodings, "ascii, utf16le or both")->capture_default_str();
  strings->add_option("-o,--output", sa.output, "write to file instead of stdout");

  ScanArgs sc;
  auto* scan = app.add_subcommand("scan", "scan a manifest (.tsv) or a single image");
  scan->add_option("input", sc.input, "manifest.tsv or image file")->required();
  scan->add_option("--catalog", sc.catalog, "signature overrides (TSV)");
  scan->add_option("--process-map", sc.process_map, "process map; {label} expands per image");
  scan->add_option("--min-len", sc.min_len)->capture_default_str();
  scan->add_option("--max-len", sc.max_len)->capture_default_str();
  scan->add_option("--encodings", sc.encodings)->capture_default_str();
  scan->add_option("--delta", sc.delta, "max key-to-value gap in adjacent layout")->capture_default_str();
  scan->add_option("--window", sc.window, "context window in bytes")->capture_default_str();
  scan->add_flag("--deterministic", sc.deterministic, "omit the timestamp");
  scan->add_option("--format", sc.format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  scan->add_option("--columns", sc.columns, "matrix columns as app/browser,...");
  scan->add_flag("--case-insensitive", sc.case_insensitive, "match keys ignoring case");
  scan->add_option("--browser", sc.browser, "session browser (overrides manifest)");
  scan->add_option("--application", sc.application, "session application (overrides manifest)");
  scan->add_option("-o,--output", sc.output);
  scan->add_option("-j,--jobs", sc.jobs, "images scanned in parallel")->check(CLI::PositiveNumber)->capture_default_str();

  MatrixArgs ma;
  auto* matrix = app.add_subcommand("matrix", "render the presence matrix of JSON reports");
  matrix->add_option("reports", ma.reports, "scan reports");
  matrix->add_option("--columns", ma.columns);
  matrix->add_option("-o,--output", ma.output);

  FabricateArgs fa;
  auto* fab = app.add_subcommand("fabricate", "generate a synthetic corpus with ground truth");
  fab->add_option("plan", fa.plan, "plan JSON");
  fab->add_option("--preset", fa.preset, "built-in plan (table1)");
  fab->add_option("--out", fa.out_dir, "output directory")->required();
  fab->add_option("--image-size", fa.image_size, "override image size in bytes");
  fab->add_flag("--full-size", fa.full_size, "512 MiB preset images");
  fab->add_option("--seed", fa.seed, "override filler seed");

  AttributeArgs aa;
  auto* attr = app.add_subcommand("attribute", "look up offsets in a process map");
  attr->add_option("--process-map", aa.process_map)->required();
  attr->add_option("offsets", aa.offsets, "decimal or 0x offsets")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*strings) return cmd_strings(sa, out);
    if (*scan) return cmd_scan(sc, out);
    if (*matrix) return cmd_matrix(ma, out);
    if (*fab) return cmd_fabricate(fa, out);
    if (*attr) return cmd_attribute(aa, out);
  } catch (const Error& e) {
    err << "ramsift: " << errc_name(e.code()) << ": " << e.what() << '\n';
    return e.code() == Errc::invalid_options ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "ramsift: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ramsift
