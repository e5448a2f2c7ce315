#include "ramsift/corpus.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "ramsift/error.hpp"

namespace ramsift {

namespace {

class FileSource final : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) {
      throw Error(Errc::io_failure, "cannot open " + path.string() + ": " + std::strerror(errno));
    }
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
      int err = errno;
      ::close(fd_);
      throw Error(Errc::io_failure, "cannot stat " + path.string() + ": " + std::strerror(err));
    }
    size_ = static_cast<std::uint64_t>(st.st_size);
  }

  FileSource(const FileSource&) = delete;
  FileSource& operator=(const FileSource&) = delete;

  ~FileSource() override {
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint64_t size() const override { return size_; }

  std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const override {
    std::size_t done = 0;
    while (done < out.size()) {
      ssize_t n = ::pread(fd_, out.data() + done, out.size() - done,
                          static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::io_failure, "read failed on " + path_.string() + " at offset " +
                                          std::to_string(offset + done) + ": " +
                                          std::strerror(errno));
      }
      if (n == 0) break;
      done += static_cast<std::size_t>(n);
    }
    return done;
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  std::uint64_t size_ = 0;
};

class BufferSource final : public ByteSource {
 public:
  explicit BufferSource(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  std::uint64_t size() const override { return bytes_.size(); }

  std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const override {
    if (offset >= bytes_.size()) return 0;
    std::size_t n = std::min<std::uint64_t>(out.size(), bytes_.size() - offset);
    std::memcpy(out.data(), bytes_.data() + offset, n);
    return n;
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void manifest_error(Errc code, std::size_t line_no, const std::string& what) {
  throw Error(code, "manifest line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

MemoryImage::MemoryImage(std::shared_ptr<const ByteSource> source, std::string label)
    : source_(std::move(source)), label_(std::move(label)), size_(source_->size()) {}

MemoryImage MemoryImage::from_file(const std::filesystem::path& path, std::string label) {
  auto source = std::make_shared<FileSource>(path);
  if (source->size() == 0) {
    throw Error(Errc::zero_size, "image " + path.string() + " is empty");
  }
  return MemoryImage(std::move(source), std::move(label));
}

MemoryImage MemoryImage::from_bytes(std::vector<std::uint8_t> bytes, std::string label) {
  return MemoryImage(std::make_shared<BufferSource>(std::move(bytes)), std::move(label));
}

std::vector<std::uint8_t> MemoryImage::read_range(std::uint64_t offset, std::size_t length) const {
  std::vector<std::uint8_t> out(length);
  out.resize(read_at(offset, out));
  return out;
}

const ManifestEntry* ImageManifest::find(std::string_view label) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const ManifestEntry& e) { return e.label == label; });
  return it == entries.end() ? nullptr : &*it;
}

ImageManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
  ImageManifest manifest;
  std::unordered_set<std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::string body = trim(std::string_view(line).substr(1));
      std::size_t colon = body.find(':');
      if (colon != std::string::npos) {
        std::string key = trim(std::string_view(body).substr(0, colon));
        std::string value = trim(std::string_view(body).substr(colon + 1));
        if (key == "browser") manifest.session.browser = value;
        if (key == "application") manifest.session.application = value;
      }
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() != 4) {
      manifest_error(Errc::malformed_manifest, line_no,
                     "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
    }
    ManifestEntry entry;
    entry.label = fields[0];
    if (entry.label.empty()) manifest_error(Errc::malformed_manifest, line_no, "empty label");
    try {
      std::size_t used = 0;
      entry.step_index = std::stoll(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      manifest_error(Errc::malformed_manifest, line_no, "bad step_index '" + fields[1] + "'");
    }
    entry.step_description = fields[2];
    if (fields[3].empty()) manifest_error(Errc::malformed_manifest, line_no, "empty path");
    std::filesystem::path p(fields[3]);
    entry.path = p.is_absolute() ? p : base_dir / p;

    if (!labels.insert(entry.label).second) {
      manifest_error(Errc::duplicate_label, line_no, "duplicate label '" + entry.label + "'");
    }
    if (!manifest.entries.empty() && entry.step_index <= manifest.entries.back().step_index) {
      manifest_error(Errc::non_monotonic_step, line_no,
                     "step " + std::to_string(entry.step_index) + " does not follow step " +
                         std::to_string(manifest.entries.back().step_index));
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

ImageManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_file, "cannot open manifest " + path.string());
  ImageManifest manifest = parse_manifest(in, path.parent_path());
  for (const auto& entry : manifest.entries) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(entry.path, ec)) {
      throw Error(Errc::missing_file,
                  "image for " + entry.label + " not found: " + entry.path.string());
    }
    if (std::filesystem::file_size(entry.path, ec) == 0 || ec) {
      throw Error(Errc::zero_size, "image for " + entry.label + " is empty: " + entry.path.string());
    }
  }
  return manifest;
}

void write_manifest(std::ostream& out, const ImageManifest& manifest) {
  if (!manifest.session.browser.empty()) out << "# browser: " << manifest.session.browser << '\n';
  if (!manifest.session.application.empty()) {
    out << "# application: " << manifest.session.application << '\n';
  }
  for (const auto& e : manifest.entries) {
    out << e.label << '\t' << e.step_index << '\t' << e.step_description << '\t'
        << e.path.generic_string() << '\n';
  }
}

MemoryImage open_image(const ManifestEntry& entry) {
  return MemoryImage::from_file(entry.path, entry.label);
}

}  // namespace ramsift
