#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ramsift {

/// Random-access byte provider behind a MemoryImage. Implementations must be
/// safe for concurrent read_at calls; there is no shared cursor.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual std::uint64_t size() const = 0;
  /// Reads up to out.size() bytes at offset. Returns fewer bytes only at end
  /// of source. Throws Error(io_failure) on a failed read.
  virtual std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const = 0;
};

/// A raw memory dump: flat bytes, no header. Cheap to copy (shared source).
class MemoryImage {
 public:
  /// Opens a file-backed image. Throws zero_size for an empty file and
  /// io_failure if the file cannot be opened.
  static MemoryImage from_file(const std::filesystem::path& path, std::string label);

  /// In-memory image, used by tests and small fixtures. Empty buffers are
  /// allowed here; only acquisition files are required to be non-empty.
  static MemoryImage from_bytes(std::vector<std::uint8_t> bytes, std::string label);

  const std::string& label() const noexcept { return label_; }
  std::uint64_t size() const noexcept { return size_; }

  std::size_t read_at(std::uint64_t offset, std::span<std::uint8_t> out) const {
    return source_->read_at(offset, out);
  }

  /// Convenience for small reads (tests, evidence re-reads).
  std::vector<std::uint8_t> read_range(std::uint64_t offset, std::size_t length) const;

 private:
  MemoryImage(std::shared_ptr<const ByteSource> source, std::string label);

  std::shared_ptr<const ByteSource> source_;
  std::string label_;
  std::uint64_t size_ = 0;
};

struct SessionMeta {
  std::string browser;
  std::string application;

  friend bool operator==(const SessionMeta&, const SessionMeta&) = default;
};

struct ManifestEntry {
  std::string label;
  std::int64_t step_index = 0;
  std::string step_description;
  std::filesystem::path path;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ImageManifest {
  std::vector<ManifestEntry> entries;
  SessionMeta session;

  const ManifestEntry* find(std::string_view label) const;

  friend bool operator==(const ImageManifest&, const ImageManifest&) = default;
};

/// Parses manifest text. Relative image paths are resolved against base_dir.
/// Validates labels and step ordering but does not touch the filesystem.
///
/// Format: one `label<TAB>step_index<TAB>step_description<TAB>path` per line.
/// Lines starting with `#` are comments; `# browser: X` and
/// `# application: Y` comments carry the session metadata.
ImageManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir);

/// parse_manifest plus existence checks: every image must exist
/// (missing_file) and be non-empty (zero_size).
ImageManifest load_manifest(const std::filesystem::path& path);

/// Writes a manifest in the same format. Paths are written as given.
void write_manifest(std::ostream& out, const ImageManifest& manifest);

MemoryImage open_image(const ManifestEntry& entry);

}  // namespace ramsift
