#include <sstream>

#include "../support/testing.hpp"
#include "ramsift/report.hpp"

using namespace ramsift;

namespace {

CredentialFinding sample(std::string label) {
  CredentialFinding f;
  f.app_id = "facebook";
  f.image_label = std::move(label);
  f.username = "ipsita.chinky@gmail.com";
  f.password_raw = "who678%2C%3B";
  f.password_decoded = "who678,;";
  f.match_mode = MatchMode::inline_body;
  f.offset = 327658412;
  f.confidence = Confidence::high;
  f.context_snippet = "email=ipsita.chinky@gmail.com&pass=who678%2C%3B";
  f.attributions = {{1532, "firefox.exe", 0x01000000}, {0, "kernel", 0x80001000}};
  return f;
}

ScanReport sample_report() {
  ScanReport r;
  r.options = scan_options_json({});
  r.manifest.session = {"Mozilla Firefox", "Facebook"};
  r.manifest.entries = {{"Img1", 2, "after system start", ""}, {"Img2", 4, "after login", ""}};
  CredentialFinding enc;
  enc.app_id = "sbi";
  enc.image_label = "Img2";
  enc.password_raw = "37f08c5d00de89cb3c26e50200ee7242";
  enc.encrypted = true;
  enc.offset = 99;
  enc.context_snippet = "tab\there \\ and \x01";
  CredentialFinding lone;
  lone.app_id = "sbi";
  lone.image_label = "Img2";
  lone.username = "-";
  lone.match_mode = MatchMode::adjacent;
  lone.offset = 5;
  r.images = {{"Img1", {}}, {"Img2", {lone, enc, sample("Img2")}}};
  r.matrix = build_presence_matrix(r.manifest, r.images, table1_columns());
  return r;
}

void check_same(const std::vector<ImageFindings>& a, const std::vector<ImageFindings>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    REQUIRE(a[i].findings.size() == b[i].findings.size());
    for (std::size_t k = 0; k < a[i].findings.size(); ++k) {
      CHECK(a[i].findings[k].same_report(b[i].findings[k]));
      CHECK(a[i].findings[k].image_label == b[i].findings[k].image_label);
    }
  }
}

}  // namespace

TEST_CASE("finding json keys come in a fixed order") {
  auto j = finding_to_json(sample("x"));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"app_id", "username", "password_raw", "password_decoded",
                                         "encrypted", "match_mode", "offset", "confidence",
                                         "context_snippet", "attributions"});
  CHECK(j["match_mode"] == "inline");
  CHECK(j["confidence"] == "HIGH");
  CHECK(j["attributions"][0]["virtual_address"] == 0x01000000);

  CredentialFinding bare;
  bare.app_id = "sbi";
  auto b = finding_to_json(bare);
  CHECK(b["username"].is_null());
  CHECK(b["password_decoded"].is_null());
}

TEST_CASE("report json round trip") {
  auto r = sample_report();
  std::stringstream io;
  write_json_report(io, r);
  auto text = io.str();
  CHECK(text.find("generated_at") == std::string::npos);
  auto back = read_json_report(io);
  CHECK(back.version == r.version);
  CHECK(!back.generated_at);
  CHECK(back.options.dump() == r.options.dump());
  CHECK(back.manifest.session == r.manifest.session);
  REQUIRE(back.manifest.entries.size() == 2);
  CHECK(back.manifest.entries[1].step_description == "after login");
  CHECK(back.matrix == r.matrix);
  check_same(back.images, r.images);

  r.generated_at = "2011-08-30T10:00:00Z";
  std::stringstream again;
  write_json_report(again, r);
  CHECK(read_json_report(again).generated_at == r.generated_at);
}

TEST_CASE("invalid utf-8 in snippets does not break json output") {
  auto r = sample_report();
  r.images[1].findings[1].context_snippet += " and \xff";
  std::ostringstream out;
  CHECK_NOTHROW(write_json_report(out, r));
  std::istringstream in(out.str());
  auto back = read_json_report(in);
  CHECK(back.images[1].findings[1].context_snippet.find("tab\there") == 0);
}

TEST_CASE("text report carries the same findings") {
  auto r = sample_report();
  r.images[1].findings[1].context_snippet = "tab\there \\ and \x01";
  std::ostringstream out;
  write_text_report(out, r);
  auto text = out.str();
  CHECK(text.rfind("ramsift " + std::string(tool_version()) + " scan report\n", 0) == 0);
  CHECK(text.find("session\tbrowser=Mozilla Firefox\tapplication=Facebook\n") != std::string::npos);
  CHECK(text.find("image\tImg2\tfindings=3\n") != std::string::npos);
  CHECK(text.find("password=ENCRYPTED") != std::string::npos);
  CHECK(text.find("username=\\x2D") != std::string::npos);
  CHECK(text.find("tab\\x09here \\x5C and \\x01") != std::string::npos);
  CHECK(text.find("attribution=1532:firefox.exe:0x01000000,0:kernel:0x80001000") != std::string::npos);
  CHECK(text.find(render_matrix_table(r.matrix)) != std::string::npos);

  std::istringstream in(text);
  auto parsed = parse_text_findings(in);
  std::vector<ImageFindings> nonempty = {r.images[1]};
  check_same(parsed, nonempty);

  std::istringstream bad("finding\timage=a\tapp=b\n");
  CHECK_ERRC(parse_text_findings(bad), Errc::malformed_report);
}

TEST_CASE("process names with separators survive the text format") {
  auto r = sample_report();
  r.images[1].findings[2].attributions = {{7, "odd:name,here", 0x10}};
  std::ostringstream out;
  write_text_report(out, r);
  std::istringstream in(out.str());
  auto parsed = parse_text_findings(in);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].findings[2].attributions == r.images[1].findings[2].attributions);
}

TEST_CASE("matrix table layout") {
  PresenceMatrix m;
  m.rows = {"Img1", "Img10"};
  m.columns = {{"sbi", "GC"}, {"irctc", "MF"}};
  m.cells = {{true, false}, {false, false}};
  CHECK(render_matrix_table(m) ==
        "Image  sbi/GC  irctc/MF\n"
        "Img1   Yes     No\n"
        "Img10  No      No\n");
  PresenceMatrix empty;
  empty.columns = table1_columns();
  auto header = render_matrix_table(empty);
  CHECK(std::count(header.begin(), header.end(), '\n') == 1);
  CHECK(header.find("sonicwall/MF") != std::string::npos);
}

TEST_CASE("merging matrices") {
  PresenceMatrix a, b;
  a.rows = {"Img1", "Img2"};
  a.columns = {{"sbi", "GC"}};
  a.cells = {{false}, {true}};
  b.rows = {"Img2"};
  b.columns = {{"irctc", "MF"}, {"sbi", "GC"}};
  b.cells = {{true, false}};
  std::vector<PresenceMatrix> both = {a, b};
  auto m = merge_matrices(both);
  CHECK(m.columns == std::vector<MatrixColumn>{{"sbi", "GC"}, {"irctc", "MF"}});
  CHECK(m.cells == std::vector<std::vector<bool>>{{false, false}, {true, true}});

  b.rows = {"Img9"};
  std::vector<PresenceMatrix> bad = {a, b};
  CHECK_ERRC(merge_matrices(bad), Errc::unknown_label);
  CHECK(merge_matrices({}).rows.empty());
}

TEST_CASE("malformed reports") {
  for (const char* text : {"", "[]", "{\"version\": 1}", R"({"version": "x", "images": [{"label": "a"}]})",
                           R"({"version": "x", "images": [{"label": "a", "findings": [{"app_id": "s"}]}]})",
                           R"({"version": "x", "images": [], "matrix": {"rows": ["a"], "columns": [], "cells": []}})",
                           R"({"version": "x", "images": [], "matrix": {"rows": [], "columns": ["bad"], "cells": []}})"}) {
    CAPTURE(text);
    std::istringstream in(text);
    CHECK_ERRC(read_json_report(in), Errc::malformed_report);
  }
  CHECK_ERRC(load_json_report("/nonexistent/report.json"), Errc::missing_file);
}

TEST_CASE("options echo") {
  ScanOptions o;
  o.carve.encodings.utf16le = false;
  o.window = 2048;
  auto j = scan_options_json(o);
  CHECK(j["encodings"] == nlohmann::ordered_json::array({"ascii"}));
  CHECK(j["window"] == 2048);
  CHECK(j["delta"] == 64);
  CHECK(utc_timestamp().size() == 20);
}
