#include <doctest.h>

#include <cmath>
#include <random>

#include "evrecon/errors.hpp"
#include "evrecon/nn/unet.hpp"
#include "evrecon/reconstructors.hpp"

using namespace evrecon;

namespace {

std::vector<Event> random_events(std::size_t n, std::uint64_t seed, SensorGeometry g) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> xd(0, g.width - 1), yd(0, g.height - 1), dt(0, 500), pd(0, 1);
  std::vector<Event> ev;
  Timestamp t = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t += dt(rng);
    ev.push_back(Event{static_cast<std::uint16_t>(xd(rng)), static_cast<std::uint16_t>(yd(rng)), t,
                       static_cast<std::int8_t>(pd(rng) ? 1 : -1)});
  }
  return ev;
}

}  // namespace

TEST_CASE("integrate basics and additivity") {
  const SensorGeometry g(8, 6);
  const auto s0 = IntegrationState::zero(g, 0.2);
  CHECK(integrate(s0, {}).loglum == s0.loglum);
  std::vector<Event> one{{3, 4, 10, 1}};
  const auto s1 = integrate(s0, one);
  CHECK(s1.loglum(3, 4) == 0.2);
  CHECK(s1.loglum.values()[0] == 0.0);

  const auto ev = random_events(2000, 1, g);
  const std::span<const Event> all(ev);
  const auto ab = integrate(integrate(s0, all.first(700)), all.subspan(700));
  const auto whole = integrate(s0, all);
  for (std::size_t i = 0; i < whole.loglum.size(); ++i) {
    CHECK(ab.loglum.values()[i] == doctest::Approx(whole.loglum.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("highpass with alpha 0 equals integration exactly") {
  const SensorGeometry g(8, 6);
  const auto ev = random_events(3000, 2, g);
  auto hp = HighpassState::zero(g, 0.0, 0.17);
  for (const auto& e : ev) hp = highpass_step(std::move(hp), e);
  const auto in = integrate(IntegrationState::zero(g, 0.17), ev);
  CHECK(hp.loglum == in.loglum);
}

TEST_CASE("highpass decays analytically") {
  const SensorGeometry g(2, 2);
  auto hp = HighpassState::zero(g, 10.0, 0.2);
  highpass_update(hp, Event{1, 0, 50000, 1});
  const Image v = highpass_value_at(hp, 50000 + 100000);  // dt = 1/alpha
  CHECK(v(1, 0) == doctest::Approx(0.2 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(v(0, 0) == 0.0);
  CHECK_THROWS(highpass_update(hp, Event{1, 0, 40000, 1}));
  CHECK_THROWS(HighpassState::zero(g, -1.0));
}

TEST_CASE("highpass periodic events match the scalar recurrence") {
  const SensorGeometry g(1, 1);
  const double alpha = 2 * std::numbers::pi * 5, c = 0.18;
  const Timestamp period = 2000;  // 500 Hz
  auto hp = HighpassState::zero(g, alpha, c);
  double oracle = 0.0;
  const double decay = std::exp(-alpha * period * 1e-6);
  for (int i = 1; i <= 2000; ++i) {
    highpass_update(hp, Event{0, 0, i * period, 1});
    oracle = oracle * decay + c;
  }
  CHECK(std::abs(hp.loglum(0, 0) - oracle) < 1e-9);
  CHECK(std::abs(oracle - c / (1 - decay)) < 1e-9);  // steady state reached
}

TEST_CASE("state_to_frame display mapping") {
  const SensorGeometry g(4, 4);
  const Frame f = state_to_frame(IntegrationState::zero(g), 77);
  CHECK(f.t == 77);
  for (double v : f.image.values()) CHECK(v == doctest::Approx(0.5));
  Image l(4, 4, 0.0);
  l(1, 1) = std::log(2.0);
  l(2, 2) = 5.0;
  CHECK(state_to_frame(l, 0).image(1, 1) == doctest::Approx(1.0));
  CHECK(state_to_frame(l, 0).image(2, 2) == 1.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (auto& v : l.values()) v = nd(rng);
  const Frame r = state_to_frame(l, 0);
  for (std::size_t i = 0; i < l.size(); ++i) {
    CHECK(r.image.values()[i] == doctest::Approx(std::min(1.0, 0.5 * std::exp(l.values()[i]))));
  }
}

TEST_CASE("bilateral filter") {
  Image flat(9, 7, 0.3);
  const Image out = bilateral_filter(flat);
  for (double v : out.values()) CHECK(v == doctest::Approx(0.3));

  Image img(11, 9, 0.2);
  img(5, 4) = 0.9;
  img(0, 0) = 0.25;
  img(10, 8) = 0.1;
  const int d = 5;
  const double sigma = 25.0;
  const Image f = bilateral_filter(img, d, sigma);
  // brute force, written out in full
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double num = 0, den = 0;
      for (int j = -2; j <= 2; ++j) {
        for (int i = -2; i <= 2; ++i) {
          const int xx = std::min(std::max(x + i, 0), img.width() - 1);
          const int yy = std::min(std::max(y + j, 0), img.height() - 1);
          const double q = img(xx, yy), p = img(x, y);
          const double sr = sigma / 255.0;
          const double w = std::exp(-(i * i + j * j) / (2 * sigma * sigma)) * std::exp(-(q - p) * (q - p) / (2 * sr * sr));
          num += w * q;
          den += w;
        }
      }
      CHECK(std::abs(f(x, y) - num / den) < 1e-6);
    }
  }
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 0.7);
  for (auto& v : img.values()) v = u(rng);
  const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
  const Image filtered = bilateral_filter(img);
  for (double v : filtered.values()) {
    CHECK(v >= *lo - 1e-12);
    CHECK(v <= *hi + 1e-12);
  }
  CHECK_THROWS(bilateral_filter(img, 4, 25));
}

TEST_CASE("reset_state and e2v_step") {
  const SensorGeometry g(20, 12);
  CHECK(reset_state(g, 0).frames.empty());
  const auto s3 = reset_state(g, 3);
  REQUIRE(s3.frames.size() == 3);
  for (const auto& f : s3.frames) {
    for (double v : f.values()) CHECK(v == 0.5);
  }

  const auto cfg = nn::NetConfig::tiny(4, 2);
  const auto zero = nn::zero_weights(cfg);
  const auto ev = random_events(300, 6, g);
  const auto tensor = voxelize(EventWindow(ev), 4, g);
  auto [frame, next] = e2v_step(reset_state(g, 2), tensor, zero, 123);
  CHECK(frame.t == 123);
  for (double v : frame.image.values()) CHECK(v == 0.5);
  REQUIRE(next.frames.size() == 2);

  const auto w = nn::init_weights(cfg, 9);
  auto [f1, s1] = e2v_step(reset_state(g, 2), tensor, w, 0);
  auto [f2, s2] = e2v_step(reset_state(g, 2), tensor, w, 0);
  CHECK(f1.image == f2.image);
  CHECK(s1.frames.back() == f1.image);
  CHECK(s1.frames.front() == reset_state(g, 1).frames[0]);
  for (double v : f1.image.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(e2v_step(reset_state(g, 3), tensor, w, 0), ShapeError);
}

TEST_CASE("reconstruct emits one frame per window") {
  const SensorGeometry g(16, 16);
  EventStream s{g, random_events(1050, 7, g)};
  ReconstructionOptions opt;
  opt.window_size = 100;
  opt.bins = 3;
  for (Method m : {Method::integrate, Method::highpass}) {
    opt.method = m;
    const auto frames = reconstruct(s, opt);
    REQUIRE(frames.size() == 10);
    CHECK(frames[0].t == s.events[99].t);
    CHECK(frames[9].t == s.events[999].t);
  }
  opt.method = Method::integrate;
  opt.frame_times = std::vector<Timestamp>{0, s.events.back().t};
  const auto at = reconstruct(s, opt);
  REQUIRE(at.size() == 2);
  const auto full = state_to_frame(integrate(IntegrationState::zero(g), s.events), 0);
  CHECK(at[1].image == full.image);

  opt.frame_times.reset();
  opt.method = Method::e2v;
  CHECK_THROWS(reconstruct(s, opt));
  const auto w = nn::init_weights(nn::NetConfig::tiny(3, 1), 1);
  opt.weights = &w;
  CHECK(reconstruct(s, opt).size() == 10);
  opt.bins = 4;
  CHECK_THROWS_AS(reconstruct(s, opt), ConfigError);
  CHECK(parse_method("highpass") == Method::highpass);
  CHECK_THROWS(parse_method("mr"));
}
