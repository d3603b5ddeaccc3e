#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evrecon {

using Timestamp = std::int64_t;  // microseconds

struct SensorGeometry {
  int width = 240;
  int height = 180;

  SensorGeometry() = default;
  SensorGeometry(int w, int h);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  Timestamp t = 0;
  std::int8_t p = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  SensorGeometry geometry;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

/// A run of exactly N consecutive events of a stream. Views the parent stream's
/// storage, so the stream must outlive its windows.
class EventWindow {
 public:
  explicit EventWindow(std::span<const Event> events);

  std::span<const Event> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  Timestamp t0() const { return events_.front().t; }
  Timestamp t_last() const { return events_.back().t; }
  Timestamp duration_us() const { return t_last() - t0(); }

 private:
  std::span<const Event> events_;
};

// ---- windowing -------------------------------------------------------------

/// Splits into consecutive non-overlapping windows of exactly `n` events.
/// The trailing remainder (< n events) is dropped.
std::vector<EventWindow> window_by_count(const EventStream& stream, std::size_t n);

/// Window durations in seconds, in window order.
std::vector<double> window_durations(std::span<const EventWindow> windows);

// ---- validation ------------------------------------------------------------

struct ValidationReport {
  std::size_t bound_violations = 0;
  std::size_t timestamp_inversions = 0;
  std::size_t polarity_violations = 0;

  bool clean() const {
    return bound_violations == 0 && timestamp_inversions == 0 && polarity_violations == 0;
  }
};

ValidationReport validate_stream(const EventStream& stream);

/// Stable sort by timestamp; repairs streams that fail the ordering check.
void sort_events(EventStream& stream);

// ---- text format: "t_seconds x y p" ---------------------------------------

EventStream parse_event_text(std::istream& in, SensorGeometry geometry);
EventStream parse_event_text(std::string_view text, SensorGeometry geometry);
void write_event_text(std::ostream& out, const EventStream& stream);

// ---- binary format ---------------------------------------------------------
// 16-byte header: "EVST", u16 W, u16 H, u64 count; then 13-byte little-endian
// records (u32 t_low, u32 t_high, u16 x, u16 y, i8 p).

inline constexpr std::size_t kBinaryHeaderSize = 16;
inline constexpr std::size_t kBinaryRecordSize = 13;

void write_event_binary(std::ostream& out, const EventStream& stream);
EventStream read_event_binary(std::istream& in);

void save_events(const std::filesystem::path& path, const EventStream& stream);
/// Dispatches on content: binary if the file starts with "EVST", text otherwise
/// (text requires `geometry`).
EventStream load_events(const std::filesystem::path& path,
                        const SensorGeometry& geometry = SensorGeometry{});

}  // namespace evrecon
