#include "ramsift/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ramsift/error.hpp"

namespace ramsift {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json opt_string(const std::optional<std::string>& s) {
  return s ? ordered_json(*s) : ordered_json(nullptr);
}

std::optional<std::string> get_opt_string(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

[[noreturn]] void bad_report(const std::string& what) {
  throw Error(Errc::malformed_report, "report: " + what);
}

std::string escape_field(std::string_view s, std::string_view extra = {}) {
  if (s == "-") return "\\x2D";
  std::string out;
  for (unsigned char c : s) {
    if (is_printable(c) && c != '\\' && extra.find(static_cast<char>(c)) == std::string_view::npos) {
      out += static_cast<char>(c);
    } else {
      char buf[5];
      std::snprintf(buf, sizeof buf, "\\x%02X", c);
      out += buf;
    }
  }
  return out;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 3 < s.size() && s[i + 1] == 'x' && hex_digit(s[i + 2]) >= 0 &&
        hex_digit(s[i + 3]) >= 0) {
      out += static_cast<char>(hex_digit(s[i + 2]) * 16 + hex_digit(s[i + 3]));
      i += 3;
    } else {
      out += s[i];
    }
  }
  return out;
}

std::string optional_field(const std::optional<std::string>& s) {
  return s ? escape_field(*s) : "-";
}

std::optional<std::string> parse_optional_field(const std::string& s) {
  if (s == "-") return std::nullopt;
  return unescape_field(s);
}

std::string hex_address(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%08llX", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

[[noreturn]] void text_line_error(std::size_t line_no, const std::string& what) {
  throw Error(Errc::malformed_report, "text report line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

const char* tool_version() noexcept { return RAMSIFT_VERSION; }

ordered_json scan_options_json(const ScanOptions& o) {
  ordered_json j;
  j["min_len"] = o.carve.min_len;
  j["max_len"] = o.carve.max_len;
  ordered_json enc = ordered_json::array();
  if (o.carve.encodings.ascii) enc.push_back("ascii");
  if (o.carve.encodings.utf16le) enc.push_back("utf16le");
  j["encodings"] = enc;
  j["delta"] = o.delta;
  j["window"] = o.window;
  j["case_insensitive"] = o.keys.case_insensitive;
  return j;
}

ordered_json finding_to_json(const CredentialFinding& f) {
  ordered_json j;
  j["app_id"] = f.app_id;
  j["username"] = opt_string(f.username);
  j["password_raw"] = opt_string(f.password_raw);
  j["password_decoded"] = opt_string(f.password_decoded);
  j["encrypted"] = f.encrypted;
  j["match_mode"] = match_mode_name(f.match_mode);
  j["offset"] = f.offset;
  j["confidence"] = confidence_name(f.confidence);
  j["context_snippet"] = f.context_snippet;
  ordered_json attrs = ordered_json::array();
  for (const auto& a : f.attributions) {
    ordered_json aj;
    aj["pid"] = a.pid;
    aj["process_name"] = a.process_name;
    aj["virtual_address"] = a.virtual_address;
    attrs.push_back(aj);
  }
  j["attributions"] = attrs;
  return j;
}

CredentialFinding finding_from_json(const ordered_json& j, const std::string& image_label) {
  try {
    CredentialFinding f;
    f.image_label = image_label;
    f.app_id = j.at("app_id").get<std::string>();
    f.username = get_opt_string(j, "username");
    f.password_raw = get_opt_string(j, "password_raw");
    f.password_decoded = get_opt_string(j, "password_decoded");
    f.encrypted = j.at("encrypted").get<bool>();
    auto mode = parse_match_mode(j.at("match_mode").get<std::string>());
    if (!mode) bad_report("unknown match_mode");
    f.match_mode = *mode;
    f.offset = j.at("offset").get<std::uint64_t>();
    auto conf = parse_confidence(j.at("confidence").get<std::string>());
    if (!conf) bad_report("unknown confidence");
    f.confidence = *conf;
    f.context_snippet = j.at("context_snippet").get<std::string>();
    for (const auto& a : j.at("attributions")) {
      f.attributions.push_back({a.at("pid").get<std::uint32_t>(),
                                a.at("process_name").get<std::string>(),
                                a.at("virtual_address").get<std::uint64_t>()});
    }
    return f;
  } catch (const json::exception& e) {
    bad_report(std::string("finding: ") + e.what());
  }
}

ordered_json report_to_json(const ScanReport& r) {
  ordered_json j;
  j["version"] = r.version;
  if (r.generated_at) j["generated_at"] = *r.generated_at;
  j["options"] = r.options;
  ordered_json m;
  m["session"] = {{"browser", r.manifest.session.browser},
                  {"application", r.manifest.session.application}};
  ordered_json entries = ordered_json::array();
  for (const auto& e : r.manifest.entries) {
    ordered_json ej;
    ej["label"] = e.label;
    ej["step_index"] = e.step_index;
    ej["step_description"] = e.step_description;
    entries.push_back(ej);
  }
  m["entries"] = entries;
  j["manifest"] = m;
  ordered_json images = ordered_json::array();
  for (const auto& img : r.images) {
    ordered_json ij;
    ij["label"] = img.label;
    ordered_json fs = ordered_json::array();
    for (const auto& f : img.findings) fs.push_back(finding_to_json(f));
    ij["findings"] = fs;
    images.push_back(ij);
  }
  j["images"] = images;
  ordered_json cols = ordered_json::array();
  for (const auto& c : r.matrix.columns) cols.push_back(c.name());
  j["matrix"] = {{"rows", r.matrix.rows}, {"columns", cols}, {"cells", r.matrix.cells}};
  return j;
}

ScanReport report_from_json(const ordered_json& j) {
  ScanReport r;
  try {
    r.version = j.at("version").get<std::string>();
    r.generated_at = get_opt_string(j, "generated_at");
    if (j.contains("options")) r.options = j.at("options");
    if (j.contains("manifest")) {
      const auto& m = j.at("manifest");
      if (m.contains("session")) {
        r.manifest.session.browser = m.at("session").value("browser", "");
        r.manifest.session.application = m.at("session").value("application", "");
      }
      for (const auto& e : m.value("entries", ordered_json::array())) {
        ManifestEntry me;
        me.label = e.at("label").get<std::string>();
        me.step_index = e.at("step_index").get<std::int64_t>();
        me.step_description = e.value("step_description", "");
        r.manifest.entries.push_back(me);
      }
    }
    for (const auto& ij : j.at("images")) {
      ImageFindings img;
      img.label = ij.at("label").get<std::string>();
      for (const auto& fj : ij.at("findings")) img.findings.push_back(finding_from_json(fj, img.label));
      r.images.push_back(std::move(img));
    }
    if (j.contains("matrix")) {
      const auto& m = j.at("matrix");
      r.matrix.rows = m.at("rows").get<std::vector<std::string>>();
      for (const auto& c : m.at("columns")) {
        auto cols = parse_columns(c.get<std::string>());
        r.matrix.columns.push_back(cols.at(0));
      }
      r.matrix.cells = m.at("cells").get<std::vector<std::vector<bool>>>();
      if (r.matrix.cells.size() != r.matrix.rows.size()) bad_report("matrix row count mismatch");
      for (const auto& row : r.matrix.cells)
        if (row.size() != r.matrix.columns.size()) bad_report("matrix column count mismatch");
    }
  } catch (const json::exception& e) {
    bad_report(e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::malformed_report) throw;
    bad_report(e.what());
  }
  return r;
}

void write_json_report(std::ostream& out, const ScanReport& report) {
  out << report_to_json(report).dump(2, ' ', false, json::error_handler_t::replace) << '\n';
}

ScanReport read_json_report(std::istream& in) {
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const json::exception& e) {
    bad_report(e.what());
  }
  return report_from_json(j);
}

ScanReport load_json_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open report " + path.string());
  try {
    return read_json_report(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_text_report(std::ostream& out, const ScanReport& r) {
  out << "ramsift " << r.version << " scan report\n";
  if (r.generated_at) out << "generated\t" << *r.generated_at << '\n';
  if (!r.manifest.session.browser.empty() || !r.manifest.session.application.empty())
    out << "session\tbrowser=" << escape_field(r.manifest.session.browser)
        << "\tapplication=" << escape_field(r.manifest.session.application) << '\n';
  for (const auto& img : r.images) {
    out << "image\t" << img.label << "\tfindings=" << img.findings.size() << '\n';
    for (const auto& f : img.findings) {
      std::string password = "-";
      if (f.encrypted) password = "ENCRYPTED";
      else if (f.password_decoded) password = escape_field(*f.password_decoded);
      std::string attrib;
      for (const auto& a : f.attributions) {
        if (!attrib.empty()) attrib += ',';
        attrib += std::to_string(a.pid) + ':' + escape_field(a.process_name, ":,") + ':' +
                  hex_address(a.virtual_address);
      }
      out << "finding\timage=" << escape_field(img.label) << "\tapp=" << escape_field(f.app_id)
          << "\tusername=" << optional_field(f.username) << "\tpassword=" << password
          << "\tpassword_raw=" << optional_field(f.password_raw)
          << "\tmode=" << match_mode_name(f.match_mode) << "\toffset=" << f.offset
          << "\tconfidence=" << confidence_name(f.confidence)
          << "\tattribution=" << (attrib.empty() ? "-" : attrib)
          << "\tsnippet=" << escape_field(f.context_snippet) << '\n';
    }
  }
  out << '\n' << render_matrix_table(r.matrix);
}

std::vector<ImageFindings> parse_text_findings(std::istream& in) {
  std::vector<ImageFindings> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("finding\t", 0) != 0) continue;
    auto fail = [&](const std::string& what) { text_line_error(line_no, what); };
    std::vector<std::pair<std::string, std::string>> kv;
    auto fields = split(line, '\t');
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto eq = fields[i].find('=');
      if (eq == std::string::npos) fail("field without '='");
      kv.emplace_back(fields[i].substr(0, eq), fields[i].substr(eq + 1));
    }
    auto get = [&](const char* key) -> const std::string& {
      for (const auto& [k, v] : kv)
        if (k == key) return v;
      text_line_error(line_no, std::string("missing ") + key);
    };
    CredentialFinding f;
    f.image_label = unescape_field(get("image"));
    f.app_id = unescape_field(get("app"));
    f.username = parse_optional_field(get("username"));
    f.password_raw = parse_optional_field(get("password_raw"));
    const auto& pw = get("password");
    f.encrypted = pw == "ENCRYPTED";
    if (!f.encrypted) f.password_decoded = parse_optional_field(pw);
    auto mode = parse_match_mode(get("mode"));
    auto conf = parse_confidence(get("confidence"));
    if (!mode || !conf) fail("bad mode or confidence");
    f.match_mode = *mode;
    f.confidence = *conf;
    try {
      f.offset = std::stoull(get("offset"));
    } catch (const std::exception&) {
      fail("bad offset");
    }
    const auto& attrib = get("attribution");
    if (attrib != "-") {
      for (const auto& item : split(attrib, ',')) {
        auto parts = split(item, ':');
        if (parts.size() != 3) fail("bad attribution");
        try {
          f.attributions.push_back({static_cast<std::uint32_t>(std::stoul(parts[0])),
                                    unescape_field(parts[1]), std::stoull(parts[2], nullptr, 16)});
        } catch (const std::exception&) {
          fail("bad attribution");
        }
      }
    }
    f.context_snippet = unescape_field(get("snippet"));
    if (out.empty() || out.back().label != f.image_label) out.push_back({f.image_label, {}});
    out.back().findings.push_back(std::move(f));
  }
  return out;
}

std::string render_matrix_table(const PresenceMatrix& m) {
  std::vector<std::string> header{"Image"};
  for (const auto& c : m.columns) header.push_back(c.name());
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = std::max<std::size_t>(header[i].size(), 3);
  for (const auto& r : m.rows) width[0] = std::max(width[0], r.size());

  std::ostringstream out;
  auto cell = [&](std::size_t col, const std::string& text, bool last) {
    out << text;
    if (!last) out << std::string(width[col] - text.size() + 2, ' ');
  };
  for (std::size_t i = 0; i < header.size(); ++i) cell(i, header[i], i + 1 == header.size());
  out << '\n';
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    cell(0, m.rows[r], m.columns.empty());
    for (std::size_t c = 0; c < m.columns.size(); ++c)
      cell(c + 1, m.cells[r][c] ? "Yes" : "No", c + 1 == m.columns.size());
    out << '\n';
  }
  return out.str();
}

PresenceMatrix merge_matrices(std::span<const PresenceMatrix> matrices) {
  PresenceMatrix out;
  if (matrices.empty()) return out;
  out.rows = matrices.front().rows;
  for (const auto& m : matrices) {
    for (const auto& c : m.columns)
      if (std::find(out.columns.begin(), out.columns.end(), c) == out.columns.end())
        out.columns.push_back(c);
  }
  out.cells.assign(out.rows.size(), std::vector<bool>(out.columns.size(), false));
  for (const auto& m : matrices) {
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      auto rit = std::find(out.rows.begin(), out.rows.end(), m.rows[r]);
      if (rit == out.rows.end())
        throw Error(Errc::unknown_label, "matrix row '" + m.rows[r] + "' is not in the first report");
      auto ri = static_cast<std::size_t>(rit - out.rows.begin());
      for (std::size_t c = 0; c < m.columns.size(); ++c) {
        auto ci = static_cast<std::size_t>(
            std::find(out.columns.begin(), out.columns.end(), m.columns[c]) - out.columns.begin());
        if (m.cells[r][c]) out.cells[ri][ci] = true;
      }
    }
  }
  return out;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace ramsift
