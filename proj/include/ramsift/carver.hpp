#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ramsift/corpus.hpp"

namespace ramsift {

enum class Encoding : std::uint8_t { ascii, utf16le };

const char* encoding_name(Encoding e) noexcept;

struct EncodingSet {
  bool ascii = true;
  bool utf16le = true;

  bool empty() const noexcept { return !ascii && !utf16le; }
};

/// Bytes 0x20..0x7E. Tab, CR and LF terminate a run.
constexpr bool is_printable(std::uint8_t b) noexcept { return b >= 0x20 && b <= 0x7e; }

struct ExtractedString {
  std::uint64_t offset = 0;
  std::string text;
  Encoding encoding = Encoding::ascii;

  std::uint64_t width() const noexcept { return encoding == Encoding::ascii ? 1 : 2; }
  std::uint64_t byte_length() const noexcept { return width() * text.size(); }
  std::uint64_t end() const noexcept { return offset + byte_length(); }
  /// Image offset of the character at index pos.
  std::uint64_t offset_of(std::size_t pos) const noexcept { return offset + width() * pos; }

  friend bool operator==(const ExtractedString&, const ExtractedString&) = default;
};

struct CarveOptions {
  std::size_t min_len = 4;
  EncodingSet encodings;
  /// Runs longer than this are split; each piece keeps its own offset.
  std::size_t max_len = 4096;
  /// Read granularity when carving an image. Output does not depend on it.
  std::size_t chunk_size = std::size_t{1} << 20;
};

/// Throws Error(invalid_options) when the options cannot be honoured.
void validate(const CarveOptions& options);

struct CarveStats {
  std::uint64_t bytes_read = 0;
  std::uint64_t strings = 0;
  std::size_t chunk_buffer_bytes = 0;
  /// High-water mark of bytes held by in-progress runs and the reorder queue.
  std::size_t peak_pending_bytes = 0;
};

/// Incremental printable-string extractor. Bytes may be fed in arbitrary
/// pieces; the emitted sequence is identical for any split. Strings are
/// emitted in ascending offset order (ASCII before UTF-16LE on a tie).
class StringCarver {
 public:
  using Sink = std::function<void(ExtractedString&&)>;

  StringCarver(CarveOptions options, Sink sink);

  void feed(std::span<const std::uint8_t> bytes);
  /// Flushes runs still open at end of input. Further feeds are not allowed.
  void finish();

  std::uint64_t position() const noexcept { return pos_; }
  std::uint64_t emitted() const noexcept { return emitted_; }
  std::size_t peak_pending_bytes() const noexcept { return peak_pending_; }

 private:
  void step(std::uint8_t b);
  void end_ascii();
  void end_utf16();
  void enqueue(std::deque<ExtractedString>& queue, std::uint64_t start, std::string& text);
  void release(bool all);
  void note_pending();

  CarveOptions opt_;
  Sink sink_;
  std::uint64_t pos_ = 0;

  bool ascii_active_ = false;
  std::uint64_t ascii_start_ = 0;
  std::string ascii_text_;

  int prev_ = -1;  // byte at pos_-1, or -1 before the first byte
  bool utf16_active_ = false;
  std::uint64_t utf16_start_ = 0;
  std::uint64_t utf16_next_ = 0;  // offset where the next pair must start
  std::string utf16_text_;

  std::deque<ExtractedString> ascii_queue_;
  std::deque<ExtractedString> utf16_queue_;
  std::size_t queued_bytes_ = 0;
  bool dirty_ = false;
  bool finished_ = false;

  std::uint64_t emitted_ = 0;
  std::size_t peak_pending_ = 0;
};

/// Streams the image once in chunk_size reads. Strings already handed to
/// the sink stay valid if a later read throws.
CarveStats carve_strings(const MemoryImage& image, const CarveOptions& options,
                         const StringCarver::Sink& sink);

std::vector<ExtractedString> carve_buffer(std::span<const std::uint8_t> bytes,
                                          const CarveOptions& options);

/// `<decimal offset>:<text>` lines, the layout of Sysinternals `strings -o`.
class StringsFileWriter {
 public:
  explicit StringsFileWriter(std::ostream& out) : out_(out) {}
  void write(const ExtractedString& s);
  std::size_t lines() const noexcept { return lines_; }

 private:
  std::ostream& out_;
  std::size_t lines_ = 0;
};

std::size_t write_strings_file(std::span<const ExtractedString> strings, std::ostream& out);

/// Only the first ':' separates offset from text. Throws malformed_line with
/// the 1-based line number.
std::vector<std::pair<std::uint64_t, std::string>> parse_strings_file(std::istream& in);

}  // namespace ramsift
