#include "evrecon/event_core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "evrecon/errors.hpp"

namespace evrecon {

SensorGeometry::SensorGeometry(int w, int h) : width(w), height(h) {
  if (w < 1 || h < 1) {
    throw std::invalid_argument("sensor geometry must be at least 1x1");
  }
}

EventWindow::EventWindow(std::span<const Event> events) : events_(events) {
  if (events_.empty()) throw std::invalid_argument("event window must not be empty");
}

std::vector<EventWindow> window_by_count(const EventStream& stream, std::size_t n) {
  if (n == 0) throw std::invalid_argument("window size must be positive");
  std::vector<EventWindow> windows;
  const std::span<const Event> all(stream.events);
  const std::size_t count = all.size() / n;
  windows.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    windows.emplace_back(all.subspan(k * n, n));
  }
  return windows;
}

std::vector<double> window_durations(std::span<const EventWindow> windows) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(static_cast<double>(w.duration_us()) * 1e-6);
  return out;
}

ValidationReport validate_stream(const EventStream& stream) {
  ValidationReport report;
  const auto& g = stream.geometry;
  Timestamp prev = 0;
  bool first = true;
  for (const auto& e : stream.events) {
    if (!g.contains(e.x, e.y)) ++report.bound_violations;
    if (e.p != 1 && e.p != -1) ++report.polarity_violations;
    if (!first && e.t < prev) ++report.timestamp_inversions;
    prev = e.t;
    first = false;
  }
  return report;
}

void sort_events(EventStream& stream) {
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
}

// ---- text ------------------------------------------------------------------

namespace {

std::string line_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

// Splits on runs of spaces/tabs; returns false if the field count is not 4.
bool split_fields(std::string_view line, std::array<std::string_view, 4>& fields) {
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (count == 4) return false;
    fields[count++] = line.substr(i, j - i);
    i = j;
  }
  return count == 4;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

EventStream parse_event_text(std::string_view text, SensorGeometry geometry) {
  EventStream stream;
  stream.geometry = geometry;
  stream.events.reserve(text.size() / 24);
  std::size_t line_no = 0;
  Timestamp prev = 0;
  std::array<std::string_view, 4> f;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    if (!split_fields(line, f)) throw DataError(line_error(line_no, "expected 't x y p'"));
    double seconds = 0.0;
    long x = 0, y = 0, p = 0;
    if (!parse_number(f[0], seconds) || !parse_number(f[1], x) || !parse_number(f[2], y) ||
        !parse_number(f[3], p) || !std::isfinite(seconds) || seconds < 0.0) {
      throw DataError(line_error(line_no, "malformed event '" + std::string(line) + "'"));
    }
    if (x < 0 || y < 0 || x >= geometry.width || y >= geometry.height) {
      throw DataError(line_error(line_no, "coordinate (" + std::to_string(x) + ", " +
                                              std::to_string(y) + ") outside " +
                                              std::to_string(geometry.width) + "x" +
                                              std::to_string(geometry.height) + " sensor"));
    }
    if (p != 0 && p != 1 && p != -1) {
      throw DataError(line_error(line_no, "polarity must be 0, 1 or -1"));
    }
    const auto t = static_cast<Timestamp>(std::llround(seconds * 1e6));
    if (!stream.events.empty() && t < prev) {
      throw DataError(line_error(line_no, "timestamp decreases"));
    }
    prev = t;
    stream.events.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                  t, static_cast<std::int8_t>(p == 1 ? 1 : -1)});
  }
  return stream;
}

EventStream parse_event_text(std::istream& in, SensorGeometry geometry) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_event_text(std::string_view(buffer.str()), geometry);
}

void write_event_text(std::ostream& out, const EventStream& stream) {
  char buf[64];
  for (const auto& e : stream.events) {
    // Integer microseconds printed as fixed seconds; exact on re-parse.
    const auto whole = e.t / 1000000;
    const auto frac = e.t % 1000000;
    const int n = std::snprintf(buf, sizeof buf, "%lld.%06lld %u %u %d\n",
                                static_cast<long long>(whole), static_cast<long long>(frac),
                                static_cast<unsigned>(e.x), static_cast<unsigned>(e.y),
                                e.p > 0 ? 1 : 0);
    out.write(buf, n);
  }
}

// ---- binary ----------------------------------------------------------------

namespace {

template <typename T>
void put_le(char*& dst, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    *dst++ = static_cast<char>(u & 0xFF);
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const unsigned char*& src) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(src[i]) << (8 * i));
  src += sizeof(T);
  return static_cast<T>(u);
}

}  // namespace

void write_event_binary(std::ostream& out, const EventStream& stream) {
  std::array<char, kBinaryHeaderSize> header{};
  char* h = header.data();
  std::memcpy(h, "EVST", 4);
  h += 4;
  put_le<std::uint16_t>(h, static_cast<std::uint16_t>(stream.geometry.width));
  put_le<std::uint16_t>(h, static_cast<std::uint16_t>(stream.geometry.height));
  put_le<std::uint64_t>(h, stream.events.size());
  out.write(header.data(), header.size());

  constexpr std::size_t kChunk = 4096;
  std::vector<char> buf(kChunk * kBinaryRecordSize);
  std::size_t i = 0;
  while (i < stream.events.size()) {
    const std::size_t n = std::min(kChunk, stream.events.size() - i);
    char* d = buf.data();
    for (std::size_t k = 0; k < n; ++k) {
      const Event& e = stream.events[i + k];
      const auto t = static_cast<std::uint64_t>(e.t);
      put_le<std::uint32_t>(d, static_cast<std::uint32_t>(t & 0xFFFFFFFFu));
      put_le<std::uint32_t>(d, static_cast<std::uint32_t>(t >> 32));
      put_le<std::uint16_t>(d, e.x);
      put_le<std::uint16_t>(d, e.y);
      put_le<std::int8_t>(d, e.p);
    }
    out.write(buf.data(), static_cast<std::streamsize>(n * kBinaryRecordSize));
    i += n;
  }
  if (!out) throw DataError("failed writing event stream");
}

EventStream read_event_binary(std::istream& in) {
  std::array<unsigned char, kBinaryHeaderSize> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw DataError("event file too short for header");
  }
  if (std::memcmp(header.data(), "EVST", 4) != 0) throw DataError("bad event file magic");
  const unsigned char* s = header.data() + 4;
  const auto w = get_le<std::uint16_t>(s);
  const auto h = get_le<std::uint16_t>(s);
  const auto count = get_le<std::uint64_t>(s);
  if (w == 0 || h == 0) throw DataError("event file has empty geometry");

  EventStream stream;
  stream.geometry = SensorGeometry(w, h);
  stream.events.reserve(static_cast<std::size_t>(count));
  constexpr std::size_t kChunk = 4096;
  std::vector<unsigned char> buf(kChunk * kBinaryRecordSize);
  std::uint64_t remaining = count;
  while (remaining > 0) {
    const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, remaining));
    if (!in.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(n * kBinaryRecordSize))) {
      throw DataError("event file truncated");
    }
    const unsigned char* d = buf.data();
    for (std::size_t k = 0; k < n; ++k) {
      const auto lo = get_le<std::uint32_t>(d);
      const auto hi = get_le<std::uint32_t>(d);
      Event e;
      e.t = static_cast<Timestamp>((static_cast<std::uint64_t>(hi) << 32) | lo);
      e.x = get_le<std::uint16_t>(d);
      e.y = get_le<std::uint16_t>(d);
      e.p = get_le<std::int8_t>(d);
      stream.events.push_back(e);
    }
    remaining -= n;
  }
  return stream;
}

void save_events(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  if (path.extension() == ".txt") {
    write_event_text(out, stream);
  } else {
    write_event_binary(out, stream);
  }
}

EventStream load_events(const std::filesystem::path& path, const SensorGeometry& geometry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, "EVST", 4) == 0;
  in.clear();
  in.seekg(0);
  return binary ? read_event_binary(in) : parse_event_text(in, geometry);
}

}  // namespace evrecon
