#include <doctest.h>

#include <random>
#include <sstream>

#include "evrecon/errors.hpp"
#include "evrecon/event_core.hpp"

using namespace evrecon;

namespace {

EventStream constant_rate(std::size_t count, Timestamp step, SensorGeometry g = {}) {
  EventStream s{g, {}};
  for (std::size_t i = 0; i < count; ++i) {
    s.events.push_back(Event{static_cast<std::uint16_t>(i % g.width), static_cast<std::uint16_t>(i % g.height),
                             static_cast<Timestamp>(i) * step, static_cast<std::int8_t>(i % 3 ? 1 : -1)});
  }
  return s;
}

EventStream random_stream(std::size_t count, std::uint64_t seed, SensorGeometry g = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> xd(0, g.width - 1), yd(0, g.height - 1), dt(0, 40), pd(0, 1);
  EventStream s{g, {}};
  Timestamp t = 0;
  for (std::size_t i = 0; i < count; ++i) {
    t += dt(rng);
    s.events.push_back(Event{static_cast<std::uint16_t>(xd(rng)), static_cast<std::uint16_t>(yd(rng)), t,
                             static_cast<std::int8_t>(pd(rng) ? 1 : -1)});
  }
  return s;
}

}  // namespace

TEST_CASE("parse_event_text converts seconds and polarity") {
  const auto s = parse_event_text(std::string_view("0.003811 96 133 0\n"), SensorGeometry(240, 180));
  REQUIRE(s.size() == 1);
  CHECK(s.events[0] == Event{96, 133, 3811, -1});

  const auto t = parse_event_text(std::string_view("1.0000005 1 2 1\n2 3 4 -1\n\n"), SensorGeometry(240, 180));
  REQUIRE(t.size() == 2);
  CHECK(t.events[0].t == 1000001);  // rounds to nearest
  CHECK(t.events[1] == Event{3, 4, 2000000, -1});
}

TEST_CASE("parse_event_text on empty input") {
  CHECK(parse_event_text(std::string_view(""), SensorGeometry{}).empty());
  CHECK(parse_event_text(std::string_view("\n  \n"), SensorGeometry{}).empty());
}

TEST_CASE("parse_event_text errors name the line") {
  auto message = [](std::string_view text) {
    try {
      parse_event_text(text, SensorGeometry(240, 180));
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("0.1 500 10 1").find("line 1") != std::string::npos);
  CHECK(message("0.1 5 10 1\n0.2 5 x 1").find("line 2") != std::string::npos);
  CHECK(message("0.2 5 10 1\n0.1 5 10 1").find("line 2") != std::string::npos);
  CHECK(message("0.1 5 10 2").find("line 1") != std::string::npos);
  CHECK(message("0.1 5 10").find("line 1") != std::string::npos);
}

TEST_CASE("text round trip is identity") {
  const auto s = random_stream(5000, 1);
  std::ostringstream out;
  write_event_text(out, s);
  const auto back = parse_event_text(std::string_view(out.str()), s.geometry);
  CHECK(back.events == s.events);
}

TEST_CASE("binary round trip and header validation") {
  const auto s = random_stream(1000, 2, SensorGeometry(64, 48));
  std::stringstream buf;
  write_event_binary(buf, s);
  CHECK(buf.str().size() == kBinaryHeaderSize + s.size() * kBinaryRecordSize);
  const auto back = read_event_binary(buf);
  CHECK(back.geometry == s.geometry);
  CHECK(back.events == s.events);

  std::string truncated = buf.str().substr(0, buf.str().size() - 5);
  std::istringstream bad(truncated);
  CHECK_THROWS_AS(read_event_binary(bad), DataError);
  std::istringstream wrong("XXXX0000000000000");
  CHECK_THROWS_AS(read_event_binary(wrong), DataError);
}

TEST_CASE("window_by_count drops the remainder") {
  const auto seven = constant_rate(7, 1);
  const auto w7 = window_by_count(seven, 7);
  REQUIRE(w7.size() == 1);
  CHECK(w7[0].size() == 7);

  const auto ten = constant_rate(10, 1);
  const auto w = window_by_count(ten, 4);
  REQUIRE(w.size() == 2);
  CHECK(w[0].events().data() == ten.events.data());
  CHECK(w[1].events().data() == ten.events.data() + 4);
  CHECK(w[1].size() == 4);

  CHECK(window_by_count(EventStream{}, 3).empty());
  CHECK_THROWS(window_by_count(ten, 0));
}

TEST_CASE("windows concatenate back to the stream") {
  const auto s = random_stream(1237, 3);
  for (std::size_t n : {1u, 2u, 10u, 100u, 1237u, 2000u}) {
    const auto windows = window_by_count(s, n);
    std::vector<Event> joined;
    for (const auto& w : windows) {
      CHECK(w.size() == n);
      CHECK(w.t_last() >= w.t0());
      joined.insert(joined.end(), w.events().begin(), w.events().end());
    }
    joined.insert(joined.end(), s.events.begin() + static_cast<std::ptrdiff_t>(joined.size()), s.events.end());
    CHECK(joined == s.events);
  }
}

TEST_CASE("window durations") {
  const auto s = constant_rate(100000, 1);  // 1 Mev/s
  const auto windows = window_by_count(s, 25000);
  REQUIRE(windows.size() == 4);
  for (const auto& w : windows) CHECK(w.duration_us() == 24999);
  for (double d : window_durations(windows)) CHECK(d == doctest::Approx(0.024999).epsilon(1e-12));

  EventStream same{SensorGeometry{}, std::vector<Event>(5, Event{1, 1, 42, 1})};
  CHECK(window_durations(window_by_count(same, 5))[0] == 0.0);

  // brute-force per-window scan
  const auto r = random_stream(10000, 4);
  const auto rw = window_by_count(r, 333);
  const auto d = window_durations(rw);
  for (std::size_t k = 0; k < rw.size(); ++k) {
    Timestamp lo = r.events[k * 333].t, hi = lo;
    for (std::size_t i = k * 333; i < (k + 1) * 333; ++i) {
      lo = std::min(lo, r.events[i].t);
      hi = std::max(hi, r.events[i].t);
    }
    CHECK(d[k] == doctest::Approx((hi - lo) * 1e-6));
  }
}

TEST_CASE("validate_stream counts violations") {
  auto s = random_stream(100, 5);
  CHECK(validate_stream(s).clean());
  std::swap(s.events[10].t, s.events[11].t);
  s.events[10].t += 1;  // guarantee a strict inversion
  s.events[11].t = s.events[10].t - 1;
  const auto r = validate_stream(s);
  CHECK(r.timestamp_inversions == 1);
  CHECK(r.bound_violations == 0);
  s.events[20].x = 5000;
  s.events[30].p = 0;
  const auto r2 = validate_stream(s);
  CHECK(r2.bound_violations == 1);
  CHECK(r2.polarity_violations == 1);

  sort_events(s);
  CHECK(validate_stream(s).timestamp_inversions == 0);
}

TEST_CASE("validate_stream on a million events") {
  const auto s = random_stream(1000000, 6);
  CHECK(validate_stream(s).clean());
}

TEST_CASE("geometry validation") {
  CHECK_THROWS(SensorGeometry(0, 10));
  CHECK(SensorGeometry().width == 240);
  CHECK(SensorGeometry().height == 180);
}
