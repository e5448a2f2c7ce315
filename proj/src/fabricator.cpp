#include "ramsift/fabricator.hpp"

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "json.hpp"
#include "ramsift/error.hpp"
#include "ramsift/report.hpp"

namespace ramsift {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPage = 4096;
constexpr std::size_t kSubchunk = std::size_t{64} << 10;
constexpr std::size_t kWriteChunk = std::size_t{1} << 20;
constexpr std::size_t kTail = 64;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string placement_name(const PlannedImage& img, const Placement& p) {
  return img.label + ":" + p.template_id + "@" + std::to_string(p.offset);
}

const ArtifactTemplate& require_template(const std::string& id) {
  const auto* t = find_template(id);
  if (!t) throw Error(Errc::unknown_template, "unknown template '" + id + "'");
  return *t;
}

std::vector<std::string> processes_of(const Placement& p) {
  if (!p.processes.empty()) return p.processes;
  return {require_template(p.template_id).default_process};
}

std::uint32_t pid_for(const std::string& name, std::map<std::string, std::uint32_t>& others) {
  static const std::map<std::string, std::uint32_t> known = {
      {"firefox.exe", 1532}, {"chrome.exe", 2216}, {"svchost.exe", 1044},
      {"System", 4},         {"kernel", kKernelPid}};
  if (auto it = known.find(name); it != known.end()) return it->second;
  auto [it, added] = others.try_emplace(name, 3000 + static_cast<std::uint32_t>(others.size()));
  return it->second;
}

struct Interval {
  std::uint64_t begin;
  std::uint64_t end;
};

// Footprints (template bytes) and the guarded ranges around them.
struct ImageLayout {
  std::vector<Interval> guarded;
  std::vector<std::pair<std::uint64_t, const ArtifactTemplate*>> templates;
};

ImageLayout layout_of(const PlannedImage& img) {
  ImageLayout l;
  for (const auto& p : img.placements) {
    const auto& t = require_template(p.template_id);
    l.guarded.push_back({p.offset - kGuardBytes, p.offset + t.footprint() + kGuardBytes});
    l.templates.emplace_back(p.offset, &t);
  }
  std::sort(l.guarded.begin(), l.guarded.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  std::sort(l.templates.begin(), l.templates.end());
  return l;
}

class BanMatcher {
 public:
  explicit BanMatcher(const std::vector<std::string>& patterns) {
    for (const auto& p : patterns) {
      if (p.size() < 2) continue;
      std::string low;
      for (char c : p) low += lower(static_cast<std::uint8_t>(c));
      prefixes_.set(key(static_cast<std::uint8_t>(low[0]), static_cast<std::uint8_t>(low[1])));
      patterns_.push_back(std::move(low));
    }
  }

  bool hit(const std::vector<std::uint8_t>& b) const {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (prefixes_.test(key(lower(b[i]), lower(b[i + 1]))) && match(b, i, 1)) return true;
      if (i + 3 < n && b[i + 1] == 0 && b[i + 3] == 0 &&
          prefixes_.test(key(lower(b[i]), lower(b[i + 2]))) && match(b, i, 2))
        return true;
    }
    return false;
  }

 private:
  static std::uint8_t lower(std::uint8_t c) { return c >= 'A' && c <= 'Z' ? c + 32 : c; }
  static std::size_t key(std::uint8_t a, std::uint8_t b) { return (std::size_t{a} << 8) | b; }

  bool match(const std::vector<std::uint8_t>& b, std::size_t at, std::size_t width) const {
    for (const auto& p : patterns_) {
      if (at + p.size() * width > b.size()) continue;
      bool ok = true;
      for (std::size_t k = 0; ok && k < p.size(); ++k) {
        ok = lower(b[at + k * width]) == static_cast<std::uint8_t>(p[k]) &&
             (width == 1 || b[at + k * width + 1] == 0);
      }
      if (ok) return true;
    }
    return false;
  }

  std::bitset<65536> prefixes_;
  std::vector<std::string> patterns_;
};

class FillerSource {
 public:
  FillerSource(std::uint64_t seed, std::size_t image_index, double density)
      : gen_(splitmix64(seed ^ splitmix64(image_index + 1))),
        threshold_(static_cast<std::uint32_t>(std::lround(density * 65536.0))) {}

  std::uint8_t next() {
    if (!have_) {
      word_ = gen_();
      have_ = 2;
    }
    auto v = static_cast<std::uint32_t>(word_ & 0xFFFFFFFFu);
    word_ >>= 32;
    --have_;
    auto pick = v >> 16;
    if ((v & 0xFFFF) < threshold_) return static_cast<std::uint8_t>(0x20 + pick % 95);
    auto idx = pick % 161;
    return static_cast<std::uint8_t>(idx < 32 ? idx : 0x7F + (idx - 32));
  }

 private:
  std::mt19937_64 gen_;
  std::uint32_t threshold_;
  std::uint64_t word_ = 0;
  int have_ = 0;
};

// Writes the image subchunk by subchunk; filler that would contain a banned
// pattern (including across the previous tail) is redrawn.
class ImageWriter {
 public:
  ImageWriter(const FabricationPlan& plan, std::size_t index, const BanMatcher& ban)
      : plan_(plan),
        layout_(layout_of(plan.images.at(index))),
        ban_(ban),
        filler_(plan.seed, index, plan.printable_density) {}

  void fill(std::uint64_t begin, std::vector<std::uint8_t>& out) {
    const std::uint64_t end = begin + out.size();
    std::vector<bool> eligible(out.size());
    bool any = false;
    for (std::uint64_t i = begin; i < end; ++i) {
      bool e = filler_at(i);
      eligible[i - begin] = e;
      any = any || e;
    }
    std::vector<std::uint8_t> check;
    if (!any) {
      std::fill(out.begin(), out.end(), 0);
    } else {
      for (int attempt = 0;; ++attempt) {
        if (attempt == 10000)
          throw Error(Errc::malformed_plan, "cannot draw keyword-free filler at this density");
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = eligible[k] ? filler_.next() : 0;
        check.assign(tail_.begin(), tail_.end());
        check.insert(check.end(), out.begin(), out.end());
        if (!ban_.hit(check)) break;
      }
    }
    if (out.size() >= kTail) {
      tail_.assign(out.end() - kTail, out.end());
    } else {
      tail_.insert(tail_.end(), out.begin(), out.end());
      if (tail_.size() > kTail) tail_.erase(tail_.begin(), tail_.end() - kTail);
    }
    for (const auto& [offset, t] : layout_.templates) {
      std::uint64_t t_end = offset + t->footprint();
      if (t_end <= begin || offset >= end) continue;
      auto bytes = render_template(*t);
      for (std::uint64_t i = std::max(begin, offset); i < std::min(end, t_end); ++i)
        out[i - begin] = bytes[i - offset];
    }
  }

 private:
  bool filler_at(std::uint64_t pos) {
    while (cursor_ < layout_.guarded.size() && layout_.guarded[cursor_].end <= pos) ++cursor_;
    if (cursor_ < layout_.guarded.size() && layout_.guarded[cursor_].begin <= pos) return false;
    if (plan_.filler_radius == 0) return true;
    auto near = [&](const Interval& iv) {
      return pos + plan_.filler_radius >= iv.begin && pos < iv.end + plan_.filler_radius;
    };
    if (cursor_ < layout_.guarded.size() && near(layout_.guarded[cursor_])) return true;
    return cursor_ > 0 && near(layout_.guarded[cursor_ - 1]);
  }

  const FabricationPlan& plan_;
  ImageLayout layout_;
  const BanMatcher& ban_;
  FillerSource filler_;
  std::vector<std::uint8_t> tail_;
  std::size_t cursor_ = 0;
};

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
    throw Error(Errc::malformed_plan, std::string("plan: '") + key + "' must be a non-negative integer");
  return it->get<std::uint64_t>();
}

}  // namespace

std::vector<std::string> banned_filler_patterns(const Catalog& catalog) {
  std::set<std::string> all{std::string(kGausrMarker.substr(0, kGausrMarker.size() - 1))};
  for (const auto& sig : catalog) {
    all.insert(sig.username_keys.begin(), sig.username_keys.end());
    all.insert(sig.password_keys.begin(), sig.password_keys.end());
    all.insert(sig.context_urls.begin(), sig.context_urls.end());
  }
  return {all.begin(), all.end()};
}

void validate_plan(const FabricationPlan& plan) {
  if (plan.image_size == 0) throw Error(Errc::malformed_plan, "plan: image_size must be positive");
  if (!(plan.printable_density >= 0.0 && plan.printable_density < 1.0))
    throw Error(Errc::malformed_plan, "plan: printable_density must be in [0, 1)");
  std::set<std::string> labels;
  const PlannedImage* prev = nullptr;
  for (const auto& img : plan.images) {
    if (img.label.empty()) throw Error(Errc::malformed_plan, "plan: image with empty label");
    if (!labels.insert(img.label).second)
      throw Error(Errc::duplicate_label, "plan: duplicate label '" + img.label + "'");
    if (prev && img.step_index <= prev->step_index)
      throw Error(Errc::non_monotonic_step, "plan: step of '" + img.label + "' does not increase");
    prev = &img;

    std::vector<std::pair<Interval, const Placement*>> ranges;
    for (const auto& p : img.placements) {
      const auto& t = require_template(p.template_id);
      if (p.offset < kGuardBytes || p.offset + t.footprint() + kGuardBytes > plan.image_size ||
          p.offset + t.footprint() < p.offset)
        throw Error(Errc::placement_out_of_bounds,
                    "placement " + placement_name(img, p) + " (" + std::to_string(t.footprint()) +
                        " bytes plus guard) does not fit in " + std::to_string(plan.image_size) +
                        " bytes");
      for (const auto& proc : p.processes)
        if (proc.empty()) throw Error(Errc::malformed_plan, "placement " + placement_name(img, p) + " has an empty process name");
      ranges.push_back({{p.offset - kGuardBytes, p.offset + t.footprint() + kGuardBytes}, &p});
    }
    std::sort(ranges.begin(), ranges.end(),
              [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
    for (std::size_t i = 1; i < ranges.size(); ++i) {
      if (ranges[i].first.begin < ranges[i - 1].first.end)
        throw Error(Errc::overlap, "placements " + placement_name(img, *ranges[i - 1].second) +
                                       " and " + placement_name(img, *ranges[i].second) +
                                       " overlap");
    }
  }
}

FabricationPlan parse_plan(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_plan, std::string("plan: ") + e.what());
  }
  FabricationPlan plan;
  try {
    if (!j.is_object()) throw Error(Errc::malformed_plan, "plan: expected an object");
    plan.image_size = get_u64(j, "image_size", 0);
    plan.seed = get_u64(j, "seed", 0);
    plan.printable_density = j.value("printable_density", 0.3);
    plan.filler_radius = get_u64(j, "filler_radius", 0);
    if (auto s = j.find("session"); s != j.end()) {
      plan.session.browser = s->value("browser", "");
      plan.session.application = s->value("application", "");
    }
    for (const auto& ij : j.at("images")) {
      PlannedImage img;
      img.label = ij.at("label").get<std::string>();
      img.step_index = ij.value("step_index", std::int64_t{0});
      img.step_description = ij.value("step_description", "");
      for (const auto& pj : ij.value("placements", json::array())) {
        Placement p;
        p.template_id = pj.at("template").get<std::string>();
        p.offset = get_u64(pj, "offset", 0);
        if (auto pr = pj.find("process"); pr != pj.end()) {
          if (pr->is_string()) p.processes.push_back(pr->get<std::string>());
          else p.processes = pr->get<std::vector<std::string>>();
        }
        img.placements.push_back(std::move(p));
      }
      plan.images.push_back(std::move(img));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::malformed_plan, std::string("plan: ") + e.what());
  }
  validate_plan(plan);
  return plan;
}

FabricationPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open plan " + path.string());
  return parse_plan(in);
}

void write_plan(std::ostream& out, const FabricationPlan& plan) {
  ordered_json j;
  j["image_size"] = plan.image_size;
  j["seed"] = plan.seed;
  j["printable_density"] = plan.printable_density;
  j["filler_radius"] = plan.filler_radius;
  j["session"] = {{"browser", plan.session.browser}, {"application", plan.session.application}};
  ordered_json images = ordered_json::array();
  for (const auto& img : plan.images) {
    ordered_json ij;
    ij["label"] = img.label;
    ij["step_index"] = img.step_index;
    ij["step_description"] = img.step_description;
    ordered_json ps = ordered_json::array();
    for (const auto& p : img.placements) {
      ordered_json pj;
      pj["template"] = p.template_id;
      pj["offset"] = p.offset;
      if (!p.processes.empty()) pj["process"] = p.processes;
      ps.push_back(pj);
    }
    ij["placements"] = ps;
    images.push_back(ij);
  }
  j["images"] = images;
  out << j.dump(2) << '\n';
}

FabricationPlan table1_preset(std::uint64_t image_size, std::uint64_t seed) {
  static const std::array<const char*, 13> steps = {
      "after system start",        "after browser start",      "after firewall login",
      "after application login",   "idle 1 minute",            "idle 5 minutes",
      "after application logout",  "after browser close",      "idle 1 minute",
      "after firewall logout",     "idle 2 minutes",           "idle 3 minutes",
      "idle 5 minutes"};
  // One row per image, one character per matrix column (table1_columns order).
  static const std::array<const char*, 13> pattern = {
      "NNNNNNNNNN", "NNNNNNNNNN", "YYNNNNNNNN", "YYYYYYYYNY", "YYYYYYYYNY",
      "YYYYYYYYNY", "YYYNYNYYNY", "YYYNYNYYNN", "YYYNYNYYNN", "NNNNNNNNNN",
      "NNNNNNNNNN", "NNNNNNNNNN", "NNNNNNNNNN"};
  static const std::array<const char*, 10> templates = {
      "sonicwall-inline", "sonicwall-inline", "facebook-ff-inline", "facebook-gc-adjacent",
      "gmail-ff-cookie",  "gmail-gc-adjacent", "irctc-inline",      "irctc-inline",
      "sbi-ff-isolated",  "sbi-gc-inline"};

  FabricationPlan plan;
  plan.image_size = image_size;
  plan.seed = seed;
  plan.printable_density = 0.3;
  auto slot = [&](std::size_t col) { return ((col + 1) * (image_size / 12)) / kPage * kPage; };
  for (std::size_t row = 0; row < pattern.size(); ++row) {
    PlannedImage img;
    img.label = "Img" + std::to_string(row + 1);
    img.step_index = static_cast<std::int64_t>(2 * (row + 1));
    img.step_description = steps[row];
    for (std::size_t col = 0; col < 10; ++col) {
      bool firefox = col % 2 == 0;
      bool place = pattern[row][col] == 'Y';
      // The Firefox SBI column never holds a password, but the bare
      // username lingers while the browser session is alive.
      if (col == 8) place = row >= 3 && row <= 8;
      if (!place) continue;
      Placement p;
      p.template_id = templates[col];
      p.offset = slot(col);
      if (firefox) p.processes = {"firefox.exe"};
      else p.processes = {"chrome.exe", "kernel"};
      img.placements.push_back(std::move(p));
    }
    plan.images.push_back(std::move(img));
  }
  validate_plan(plan);
  return plan;
}

void write_image(const FabricationPlan& plan, std::size_t image_index, std::ostream& out) {
  BanMatcher ban(banned_filler_patterns(builtin_catalog()));
  ImageWriter writer(plan, image_index, ban);
  std::vector<std::uint8_t> chunk;
  std::vector<std::uint8_t> sub;
  for (std::uint64_t pos = 0; pos < plan.image_size;) {
    auto chunk_len = static_cast<std::size_t>(std::min<std::uint64_t>(kWriteChunk, plan.image_size - pos));
    chunk.resize(chunk_len);
    for (std::size_t k = 0; k < chunk_len; k += kSubchunk) {
      sub.resize(std::min(kSubchunk, chunk_len - k));
      writer.fill(pos + k, sub);
      std::copy(sub.begin(), sub.end(), chunk.begin() + static_cast<std::ptrdiff_t>(k));
    }
    out.write(reinterpret_cast<const char*>(chunk.data()), static_cast<std::streamsize>(chunk_len));
    if (!out) throw Error(Errc::io_failure, "write failed at offset " + std::to_string(pos));
    pos += chunk_len;
  }
}

ProcessMap plan_process_map(const FabricationPlan& plan, std::size_t image_index) {
  const auto& img = plan.images.at(image_index);
  std::map<std::string, std::uint32_t> others;
  std::vector<ProcessMapEntry> entries;
  std::vector<const Placement*> order;
  for (const auto& p : img.placements) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const Placement* a, const Placement* b) { return a->offset < b->offset; });
  std::uint64_t k = 0;
  for (const auto* p : order) {
    const auto& t = require_template(p->template_id);
    std::uint64_t start = p->offset / kPage * kPage;
    std::uint64_t end = (p->offset + t.footprint() + kPage - 1) / kPage * kPage;
    for (const auto& name : processes_of(*p)) {
      entries.push_back({start, end, pid_for(name, others), name, 0x01000000 + k * 0x00100000});
      ++k;
    }
  }
  return ProcessMap(std::move(entries));
}

std::vector<ImageFindings> ground_truth(const FabricationPlan& plan) {
  auto catalog = builtin_catalog();
  std::vector<ImageFindings> out;
  for (std::size_t i = 0; i < plan.images.size(); ++i) {
    const auto& img = plan.images[i];
    auto map = plan_process_map(plan, i);
    ImageFindings truth{img.label, {}};
    for (const auto& p : img.placements) {
      const auto& t = require_template(p.template_id);
      std::map<int, bool> group_has_session_match;
      for (const auto& e : t.expected) {
        if (e.tie_group == 0) continue;
        const auto* sig = find_signature(catalog, e.app_id);
        if (sig && matches_application(*sig, plan.session.application))
          group_has_session_match[e.tie_group] = true;
      }
      for (const auto& e : t.expected) {
        if (e.tie_group != 0 && group_has_session_match[e.tie_group]) {
          const auto* sig = find_signature(catalog, e.app_id);
          if (!sig || !matches_application(*sig, plan.session.application)) continue;
        }
        CredentialFinding f;
        f.app_id = e.app_id;
        f.image_label = img.label;
        f.username = e.username;
        f.password_raw = e.password_raw;
        f.password_decoded = e.password_decoded;
        f.encrypted = e.encrypted;
        f.match_mode = e.match_mode;
        f.offset = p.offset + e.rel_offset;
        f.confidence = e.confidence;
        f.context_snippet = e.context_snippet;
        for (const auto& m : map.entries()) {
          if (m.phys_start <= f.offset && f.offset < m.phys_end)
            f.attributions.push_back({m.pid, m.process_name, m.virt_base + (f.offset - m.phys_start)});
        }
        truth.findings.push_back(std::move(f));
      }
    }
    std::stable_sort(truth.findings.begin(), truth.findings.end(),
                     [](const CredentialFinding& a, const CredentialFinding& b) {
                       return std::tie(a.offset, a.app_id) < std::tie(b.offset, b.app_id);
                     });
    out.push_back(std::move(truth));
  }
  return out;
}

FabricationResult fabricate(const FabricationPlan& plan, const std::filesystem::path& out_dir) {
  validate_plan(plan);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::io_failure, "cannot create " + out_dir.string() + ": " + ec.message());

  auto open_out = [](const std::filesystem::path& p, std::ios::openmode mode) {
    std::ofstream f(p, mode);
    if (!f) throw Error(Errc::io_failure, "cannot write " + p.string());
    return f;
  };

  FabricationResult result;
  ImageManifest manifest;
  manifest.session = plan.session;
  for (std::size_t i = 0; i < plan.images.size(); ++i) {
    const auto& img = plan.images[i];
    auto img_path = out_dir / (img.label + ".img");
    {
      auto f = open_out(img_path, std::ios::binary | std::ios::trunc);
      write_image(plan, i, f);
      f.close();
      if (!f) throw Error(Errc::io_failure, "cannot write " + img_path.string());
    }
    auto map_path = out_dir / (img.label + ".pmap");
    {
      auto f = open_out(map_path, std::ios::trunc);
      write_process_map(f, plan_process_map(plan, i));
    }
    result.image_paths.push_back(img_path);
    result.map_paths.push_back(map_path);
    manifest.entries.push_back({img.label, img.step_index, img.step_description, img.label + ".img"});
  }

  result.manifest_path = out_dir / "manifest.tsv";
  {
    auto f = open_out(result.manifest_path, std::ios::trunc);
    write_manifest(f, manifest);
  }

  result.truth = ground_truth(plan);
  ScanReport report;
  report.options = ordered_json::object();
  report.options["source"] = "ground_truth";
  report.manifest = manifest;
  report.images = result.truth;
  auto columns = table1_columns();
  report.matrix = build_presence_matrix(manifest, result.truth, columns);
  result.ground_truth_path = out_dir / "ground_truth.json";
  {
    auto f = open_out(result.ground_truth_path, std::ios::trunc);
    write_json_report(f, report);
  }
  {
    auto f = open_out(out_dir / "plan.json", std::ios::trunc);
    write_plan(f, plan);
  }
  return result;
}

}  // namespace ramsift
