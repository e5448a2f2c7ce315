#include "ramsift/carver.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>

#include "ramsift/error.hpp"

namespace ramsift {

const char* encoding_name(Encoding e) noexcept {
  return e == Encoding::ascii ? "ascii" : "utf16le";
}

void validate(const CarveOptions& options) {
  if (options.min_len < 1) throw Error(Errc::invalid_options, "min_len must be at least 1");
  if (options.encodings.empty()) throw Error(Errc::invalid_options, "no encodings selected");
  if (options.max_len < options.min_len) {
    throw Error(Errc::invalid_options, "max_len must not be smaller than min_len");
  }
  if (options.chunk_size == 0) throw Error(Errc::invalid_options, "chunk_size must be positive");
}

StringCarver::StringCarver(CarveOptions options, Sink sink)
    : opt_(options), sink_(std::move(sink)) {
  validate(opt_);
  ascii_text_.reserve(opt_.max_len);
  utf16_text_.reserve(opt_.max_len);
}

void StringCarver::feed(std::span<const std::uint8_t> bytes) {
  const std::uint8_t* data = bytes.data();
  const std::size_t n = bytes.size();
  std::size_t i = 0;
  while (i < n) {
    // Idle: nothing open and no half pair pending, so non-printable bytes
    // cannot change any state except prev_.
    if (!ascii_active_ && !utf16_active_ && !(prev_ >= 0 && is_printable(static_cast<std::uint8_t>(prev_)))) {
      std::size_t j = i;
      while (j < n && !is_printable(data[j])) ++j;
      if (j > i) {
        prev_ = data[j - 1];
        pos_ += j - i;
        i = j;
        continue;
      }
    }
    step(data[i]);
    ++i;
  }
}

void StringCarver::step(std::uint8_t b) {
  const std::uint64_t p = pos_;

  if (opt_.encodings.ascii) {
    if (is_printable(b)) {
      if (!ascii_active_) {
        ascii_active_ = true;
        ascii_start_ = p;
        ascii_text_.clear();
      }
      ascii_text_.push_back(static_cast<char>(b));
      if (ascii_text_.size() == opt_.max_len) {
        enqueue(ascii_queue_, ascii_start_, ascii_text_);
        ascii_active_ = false;
      }
    } else if (ascii_active_) {
      end_ascii();
    }
  }

  if (opt_.encodings.utf16le) {
    const bool pair = prev_ >= 0 && is_printable(static_cast<std::uint8_t>(prev_)) && b == 0;
    const bool continues = utf16_active_ && utf16_next_ + 1 == p;
    if (continues && !pair) {
      end_utf16();
    }
    if (pair) {
      if (!continues) {
        utf16_active_ = true;
        utf16_start_ = p - 1;
        utf16_text_.clear();
      }
      utf16_text_.push_back(static_cast<char>(prev_));
      utf16_next_ = p + 1;
      if (utf16_text_.size() == opt_.max_len) {
        enqueue(utf16_queue_, utf16_start_, utf16_text_);
        utf16_active_ = false;
      }
    }
  }

  prev_ = b;
  ++pos_;
  if (dirty_) release(false);
}

void StringCarver::end_ascii() {
  if (ascii_text_.size() >= opt_.min_len) enqueue(ascii_queue_, ascii_start_, ascii_text_);
  ascii_text_.clear();
  ascii_active_ = false;
}

void StringCarver::end_utf16() {
  if (utf16_text_.size() >= opt_.min_len) enqueue(utf16_queue_, utf16_start_, utf16_text_);
  utf16_text_.clear();
  utf16_active_ = false;
}

void StringCarver::enqueue(std::deque<ExtractedString>& queue, std::uint64_t start,
                           std::string& text) {
  note_pending();
  queued_bytes_ += text.size();
  Encoding enc = (&queue == &ascii_queue_) ? Encoding::ascii : Encoding::utf16le;
  queue.push_back(ExtractedString{start, text, enc});
  text.clear();
  dirty_ = true;
}

void StringCarver::note_pending() {
  std::size_t pending = ascii_text_.size() + utf16_text_.size() + queued_bytes_;
  peak_pending_ = std::max(peak_pending_, pending);
}

void StringCarver::release(bool all) {
  std::uint64_t watermark = std::numeric_limits<std::uint64_t>::max();
  if (!all) {
    std::uint64_t ascii_mark = ascii_active_ ? ascii_start_ : pos_;
    std::uint64_t utf16_mark = pos_;
    if (utf16_active_) {
      utf16_mark = utf16_start_;
    } else if (prev_ >= 0 && is_printable(static_cast<std::uint8_t>(prev_))) {
      utf16_mark = pos_ - 1;  // a pair may still complete at pos_-1
    }
    watermark = std::min(ascii_mark, utf16_mark);
  }
  while (true) {
    std::deque<ExtractedString>* pick = nullptr;
    if (!ascii_queue_.empty() && ascii_queue_.front().offset < watermark) pick = &ascii_queue_;
    if (!utf16_queue_.empty() && utf16_queue_.front().offset < watermark &&
        (pick == nullptr || utf16_queue_.front().offset < pick->front().offset)) {
      pick = &utf16_queue_;
    }
    if (pick == nullptr) break;
    ExtractedString s = std::move(pick->front());
    pick->pop_front();
    queued_bytes_ -= s.text.size();
    ++emitted_;
    sink_(std::move(s));
  }
  dirty_ = !ascii_queue_.empty() || !utf16_queue_.empty();
}

void StringCarver::finish() {
  if (finished_) return;
  if (ascii_active_) end_ascii();
  if (utf16_active_) end_utf16();
  release(true);
  finished_ = true;
}

CarveStats carve_strings(const MemoryImage& image, const CarveOptions& options,
                         const StringCarver::Sink& sink) {
  validate(options);
  CarveStats stats;
  StringCarver carver(options, sink);
  std::vector<std::uint8_t> buffer(options.chunk_size);
  stats.chunk_buffer_bytes = buffer.size();
  std::uint64_t offset = 0;
  const std::uint64_t size = image.size();
  while (offset < size) {
    std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(buffer.size(), size - offset));
    std::size_t got = image.read_at(offset, std::span(buffer.data(), want));
    if (got == 0) {
      throw Error(Errc::io_failure, "image " + image.label() + " truncated at offset " +
                                        std::to_string(offset));
    }
    carver.feed(std::span<const std::uint8_t>(buffer.data(), got));
    offset += got;
  }
  carver.finish();
  stats.bytes_read = offset;
  stats.strings = carver.emitted();
  stats.peak_pending_bytes = carver.peak_pending_bytes();
  return stats;
}

std::vector<ExtractedString> carve_buffer(std::span<const std::uint8_t> bytes,
                                          const CarveOptions& options) {
  std::vector<ExtractedString> out;
  StringCarver carver(options, [&](ExtractedString&& s) { out.push_back(std::move(s)); });
  for (std::size_t at = 0; at < bytes.size(); at += options.chunk_size) {
    carver.feed(bytes.subspan(at, std::min(options.chunk_size, bytes.size() - at)));
  }
  carver.finish();
  return out;
}

void StringsFileWriter::write(const ExtractedString& s) {
  // Carved text is 7-bit printable, so UTF-16LE strings are already UTF-8.
  out_ << s.offset << ':' << s.text << '\n';
  if (!out_) throw Error(Errc::io_failure, "failed writing strings file");
  ++lines_;
}

std::size_t write_strings_file(std::span<const ExtractedString> strings, std::ostream& out) {
  StringsFileWriter writer(out);
  for (const auto& s : strings) writer.write(s);
  return writer.lines();
}

std::vector<std::pair<std::uint64_t, std::string>> parse_strings_file(std::istream& in) {
  std::vector<std::pair<std::uint64_t, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t colon = line.find(':');
    std::uint64_t offset = 0;
    bool ok = colon != std::string::npos && colon > 0;
    if (ok) {
      auto [ptr, ec] = std::from_chars(line.data(), line.data() + colon, offset);
      ok = ec == std::errc() && ptr == line.data() + colon;
    }
    if (!ok) {
      throw Error(Errc::malformed_line,
                  "strings file line " + std::to_string(line_no) + ": expected <offset>:<text>");
    }
    out.emplace_back(offset, line.substr(colon + 1));
  }
  return out;
}

}  // namespace ramsift
