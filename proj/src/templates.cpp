#include <algorithm>

#include "ramsift/error.hpp"
#include "ramsift/fabricator.hpp"

namespace ramsift {

namespace {

struct KeyRef {
  std::size_t block;
  std::string_view needle;
};

std::uint64_t offset_of(const std::vector<TextBlock>& blocks, KeyRef ref) {
  const auto& b = blocks.at(ref.block);
  auto pos = b.text.find(ref.needle);
  if (pos == std::string::npos) throw Error(Errc::unknown_template, "template key not found");
  return b.rel_offset + pos;
}

std::string inline_snippet(const std::vector<TextBlock>& blocks, KeyRef ref) {
  const auto& b = blocks.at(ref.block);
  return window_snippet(b.text, b.text.find(ref.needle));
}

ExpectedFinding expect(std::string app, MatchMode mode, Confidence conf) {
  ExpectedFinding e;
  e.app_id = std::move(app);
  e.match_mode = mode;
  e.confidence = conf;
  return e;
}

ArtifactTemplate sonicwall_inline() {
  ArtifactTemplate t;
  t.template_id = "sonicwall-inline";
  t.app_id = "sonicwall";
  t.default_process = "firefox.exe";
  t.blocks = {
      {0, "<HTML>"},
      {7, "<HEAD><TITLE>Page Redirecting</TITLE>"},
      {45, "<META HTTP-EQUIV=\"Pragma\" CONTENT=\"no-cache\">"},
      {91, "<META HTTP-EQUIV=\"Expires\" CONTENT=\"-1\">"},
      {132, "</HEAD>"},
      {140, "<BODY onLoad=\"top.location.href = 'http://192.168.20.1/userLogin.html';\">"},
      {214, "This page is redirecting! Click <A HREF='http://192.168.20.1/userLogin.html\">here</A>"},
      {300, "</BODY>"},
      {308, "</HTML>"},
      {316, "on: keep-alive"},
      {332, "Referer: https://192.168.20.1/auth1.html"},
      {374, "Cookie: temp=temp; SessId=523518834; PageSeed=7e88bfc81a9."},
      {454, "Content-Type: application/x-www-form-urlencoded"},
      {503, "Content-Length: 122"},
      {526,
       "param1=&param2=93BF844DF6D46F0F1453F46441968A46&sessId=523518834&id=a4&select=English"
       "&uName=306110003&pass=Nitt500&digest="},
      {4105, "t#hP"},
  };
  t.planted_username = "306110003";
  t.planted_password_raw = "Nitt500";
  auto e = expect("sonicwall", MatchMode::inline_body, Confidence::high);
  e.username = "306110003";
  e.password_raw = "Nitt500";
  e.password_decoded = "Nitt500";
  e.rel_offset = offset_of(t.blocks, {14, "pass="});
  e.context_snippet = inline_snippet(t.blocks, {14, "pass="});
  t.expected = {e};
  return t;
}

ArtifactTemplate facebook_ff_inline() {
  ArtifactTemplate t;
  t.template_id = "facebook-ff-inline";
  t.app_id = "facebook";
  t.default_process = "firefox.exe";
  t.blocks = {
      {0, "https://www.facebook.com/login.php?login_attempt=1"},
      {64, "Content-Type: application/x-www-form-urlencoded"},
      {128,
       "lsd=AVpZ6H1c&locale=en_US&email=ipsita.chinky@gmail.com&pass=who678%2C%3B"
       "&default_persistent=0&timezone=-330&lgnrnd=081237_rKWa&lgnjs=1314111157"},
  };
  t.planted_username = "ipsita.chinky@gmail.com";
  t.planted_password_raw = "who678%2C%3B";
  auto e = expect("facebook", MatchMode::inline_body, Confidence::high);
  e.username = "ipsita.chinky@gmail.com";
  e.password_raw = "who678%2C%3B";
  e.password_decoded = "who678,;";
  e.rel_offset = offset_of(t.blocks, {2, "pass="});
  e.context_snippet = inline_snippet(t.blocks, {2, "pass="});
  t.expected = {e};
  return t;
}

ArtifactTemplate facebook_gc_adjacent() {
  ArtifactTemplate t;
  t.template_id = "facebook-gc-adjacent";
  t.app_id = "facebook";
  t.layout = Layout::adjacent;
  t.default_process = "chrome.exe";
  t.blocks = {
      {0, "8@@"},
      {4, "@@@@@@"},
      {248, "//www.facebook.com/2"},
      {272, "https://www.facebook.com/login.php?login_attempt=1"},
      {328, "https://www.facebook.com/checkpoint/"},
      {380, "http://www.facebook.com/"},
      {408, "http://www.facebook.com/\""},
      {436, "https://www.facebook.com/login.php"},
      {480, "email"},
      {496, "ipsita.chinky@gmail.com"},
      {548, "pass"},
      {560, "berham!19"},
      {604, "text/html"},
      {620, "69.171.229.74"},
      {716, "https://www.facebook.com/checkpoint/d"},
      {792, "https://www.facebook.com/login.php?login_attempt=1"},
      {896, "_e_1MWL"},
      {956, "http://www.facebook.com/"},
      {1052, "http://www.facebook.com/"},
  };
  t.planted_username = "ipsita.chinky@gmail.com";
  t.planted_password_raw = "berham!19";
  auto e = expect("facebook", MatchMode::adjacent, Confidence::high);
  e.username = "ipsita.chinky@gmail.com";
  e.password_raw = "berham!19";
  e.password_decoded = "berham!19";
  e.rel_offset = 548;
  e.context_snippet = "email ipsita.chinky@gmail.com pass berham!19";
  t.expected = {e};
  return t;
}

ArtifactTemplate gmail_ff_cookie() {
  ArtifactTemplate t;
  t.template_id = "gmail-ff-cookie";
  t.app_id = "gmail-ff";
  t.layout = Layout::cookie;
  t.default_process = "firefox.exe";
  t.blocks = {
      {0, "qRW8I"},
      {97, "=@)"},
      {102, " SHKtU0htggZw%26gausr%3Dipsita.chinky%2540gmail.com"},
      {155, "Content-Encoding: gzip"},
      {179, "Date: Tue, 23 Aug 2011 18:05:37 GMT"},
      {216, "Expires: Tue, 23 Aug 2011 18:05:37 GMT"},
      {256, "Cache-Control: private, max-age=0"},
      {291, "X-Content-Type-Options: nosniff"},
      {324, "X-XSS-Protection: 1; mode=block"},
      {357, "Content-Length: 674"},
      {378, "Server: GSE"},
      {397, "Set-Cookie: LSID=mail|s.IN:DQAAAL0AAACNKnQxFIOEmQaAp"},
      {724, "Set-Cookie: GAUSR=mail:ipsita.chinky@gmail.com; Path=/accounts;secure"},
      {794,
       "Location: https://accounts.google.co.in/accounts/SetSID?ssdc=1&sidt=AlWU2cs%2F1jKI0%2Bfe"
       "R3yEy22NCywE05YSVI&Passwd=abc*%21123&rmShown=1&signIn=Sign+in&asts="},
  };
  t.planted_username = "ipsita.chinky@gmail.com";
  t.planted_password_raw = "abc*%21123";
  auto e = expect("gmail-ff", MatchMode::inline_body, Confidence::high);
  e.username = "ipsita.chinky@gmail.com";
  e.password_raw = "abc*%21123";
  e.password_decoded = "abc*!123";
  e.rel_offset = offset_of(t.blocks, {13, "Passwd="});
  e.context_snippet = inline_snippet(t.blocks, {13, "Passwd="});
  t.expected = {e};
  return t;
}

ArtifactTemplate gmail_gc_adjacent() {
  ArtifactTemplate t;
  t.template_id = "gmail-gc-adjacent";
  t.app_id = "gmail-gc";
  t.layout = Layout::adjacent;
  t.default_process = "chrome.exe";
  t.blocks = {
      {0, "https://accounts.google.com/ServiceLogin?service=mail"},
      {64, "https://accounts.google.com/ServiceLoginAuth"},
      {128, "Email"},
      {144, "ipsita.chinky@gmail.com"},
      {192, "Passwd"},
      {208, "awesome^&28"},
      {240, "text/html"},
  };
  t.planted_username = "ipsita.chinky@gmail.com";
  t.planted_password_raw = "awesome^&28";
  auto e = expect("gmail-gc", MatchMode::adjacent, Confidence::high);
  e.username = "ipsita.chinky@gmail.com";
  e.password_raw = "awesome^&28";
  e.password_decoded = "awesome^&28";
  e.rel_offset = 192;
  e.context_snippet = "Email ipsita.chinky@gmail.com Passwd awesome^&28";
  t.expected = {e};
  return t;
}

ArtifactTemplate irctc_inline() {
  ArtifactTemplate t;
  t.template_id = "irctc-inline";
  t.app_id = "irctc";
  t.default_process = "chrome.exe";
  t.blocks = {
      {0, "8MD"},
      {207,
       "-bin/bv60.dll/irctc/booking/planner.do?screen=fromlogin&BV_SessionID=@@@1511077481."
       "1340172850@@@&BV_EngineID=ccdldfhdehfgdlcefecehidfgmdfff.0 HTTP/1.1"},
      {362, "Host: www.irctc.co.in"},
      {385, "Connection: keep-alive"},
      {409, "Cache-Control: max-age=0"},
      {435,
       "User-Agent: Mozilla/5.0 (Windows NT 5.1) AppleWebKit/536.5 (KHTML, like Gecko) "
       "Chrome/19.0.1084.56 Safari/536.5"},
      {548, "Accept: text/html,application/xhtml+xml,application/xml;q=0.9,*/*;q=0.8"},
      {621, "Referer: https://www.irctc.co.in/"},
      {656, "Accept-Encoding: gzip,deflate,sdch"},
      {692, "Accept-Language: en-US,en;q=0.8"},
      {725, "Accept-Charset: ISO-8859-1,utf-8;q=0.7,*;q=0.3"},
      {773,
       "Cookie: __utma=168397561.1282852060.1340176438.1340176438.1340176438.1; "
       "__utmb=168397561.1.10.1340176438; __utmc=168397561; "
       "__utmz=168397561.1340176438.1.1.utmcsr=(direct)|utmccn=(direct)|utmcmd=(none)"},
      {979, "n=home&userName=ipsita689&password=durga21&button=Login"},
      {1232, "t&SV"},
  };
  t.planted_username = "ipsita689";
  t.planted_password_raw = "durga21";
  auto e = expect("irctc", MatchMode::inline_body, Confidence::high);
  e.username = "ipsita689";
  e.password_raw = "durga21";
  e.password_decoded = "durga21";
  e.rel_offset = offset_of(t.blocks, {12, "password="});
  e.context_snippet = inline_snippet(t.blocks, {12, "password="});
  t.expected = {e};
  return t;
}

ArtifactTemplate sbi_gc_inline() {
  ArtifactTemplate t;
  t.template_id = "sbi-gc-inline";
  t.app_id = "sbi";
  t.default_process = "chrome.exe";
  t.blocks = {
      {0, "https://www.onlinesbi.com/retail/loginsubmit.htm"},
      {64, "Host: www.onlinesbi.com"},
      {128, "keyBoardType=&userName=ipsita_m&password=37f08c5d00de89cb3c26e50200ee7242&Submit=Login"},
  };
  t.planted_username = "ipsita_m";
  t.planted_password_raw = "37f08c5d00de89cb3c26e50200ee7242";
  auto e = expect("sbi", MatchMode::inline_body, Confidence::high);
  e.username = "ipsita_m";
  e.password_raw = "37f08c5d00de89cb3c26e50200ee7242";
  e.encrypted = true;
  e.rel_offset = offset_of(t.blocks, {2, "password="});
  e.context_snippet = inline_snippet(t.blocks, {2, "password="});
  t.expected = {e};
  return t;
}

ArtifactTemplate sbi_ff_isolated() {
  ArtifactTemplate t;
  t.template_id = "sbi-ff-isolated";
  t.app_id = "sbi";
  t.default_process = "firefox.exe";
  t.blocks = {{0, "userName=ipsita_m"}};
  t.planted_username = "ipsita_m";
  // The bare key is shared by every signature that uses userName; none has
  // context here, so they tie and the session application decides.
  for (const auto& sig : builtin_catalog()) {
    if (std::find(sig.username_keys.begin(), sig.username_keys.end(), "userName") ==
        sig.username_keys.end())
      continue;
    auto e = expect(sig.app_id, MatchMode::inline_body, Confidence::low);
    e.username = "ipsita_m";
    e.context_snippet = t.blocks[0].text;
    e.tie_group = 1;
    t.expected.push_back(e);
  }
  return t;
}

}  // namespace

const char* layout_name(Layout l) noexcept {
  switch (l) {
    case Layout::inline_body: return "inline";
    case Layout::adjacent: return "adjacent";
    case Layout::cookie: return "cookie";
  }
  return "?";
}

std::uint64_t ArtifactTemplate::footprint() const {
  std::uint64_t end = 0;
  for (const auto& b : blocks) end = std::max<std::uint64_t>(end, b.rel_offset + b.text.size());
  return end;
}

const std::vector<ArtifactTemplate>& builtin_templates() {
  static const std::vector<ArtifactTemplate> all = {
      sonicwall_inline(), facebook_ff_inline(), facebook_gc_adjacent(), gmail_ff_cookie(),
      gmail_gc_adjacent(), irctc_inline(),      sbi_gc_inline(),        sbi_ff_isolated(),
  };
  return all;
}

const ArtifactTemplate* find_template(std::string_view id) {
  const auto& all = builtin_templates();
  auto it = std::find_if(all.begin(), all.end(),
                         [&](const ArtifactTemplate& t) { return t.template_id == id; });
  return it == all.end() ? nullptr : &*it;
}

std::vector<std::uint8_t> render_template(const ArtifactTemplate& t) {
  std::vector<std::uint8_t> out(t.footprint(), 0);
  for (const auto& b : t.blocks)
    std::copy(b.text.begin(), b.text.end(), out.begin() + static_cast<std::ptrdiff_t>(b.rel_offset));
  return out;
}

}  // namespace ramsift
