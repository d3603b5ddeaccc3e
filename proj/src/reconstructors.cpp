#include "evrecon/reconstructors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evrecon/errors.hpp"

namespace evrecon {

// ---- integration -----------------------------------------------------------

IntegrationState IntegrationState::zero(const SensorGeometry& g, double c) {
  return IntegrationState{Image(g.width, g.height, 0.0), c};
}

void integrate_in_place(IntegrationState& state, std::span<const Event> events) {
  const int w = state.loglum.width();
  auto v = state.loglum.values();
  for (const Event& e : events) {
    v[static_cast<std::size_t>(e.y) * w + e.x] += e.p * state.c;
  }
}

IntegrationState integrate(IntegrationState state, std::span<const Event> events) {
  integrate_in_place(state, events);
  return state;
}

// ---- high-pass -------------------------------------------------------------

HighpassState HighpassState::zero(const SensorGeometry& g, double alpha, double c) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("high-pass alpha must be >= 0");
  return HighpassState{Image(g.width, g.height, 0.0),
                       std::vector<Timestamp>(g.pixel_count(), 0), alpha, c};
}

void highpass_update(HighpassState& state, const Event& event) {
  const std::size_t i = static_cast<std::size_t>(event.y) * state.loglum.width() + event.x;
  const Timestamp dt_us = event.t - state.last_t[i];
  if (dt_us < 0) {
    throw std::invalid_argument("high-pass: event time precedes last update at its pixel");
  }
  double& v = state.loglum.values()[i];
  if (state.alpha > 0.0 && dt_us > 0) v *= std::exp(-state.alpha * static_cast<double>(dt_us) * 1e-6);
  v += event.p * state.c;
  state.last_t[i] = event.t;
}

HighpassState highpass_step(HighpassState state, const Event& event) {
  highpass_update(state, event);
  return state;
}

Image highpass_value_at(const HighpassState& state, Timestamp t) {
  Image out = state.loglum;
  if (state.alpha == 0.0) return out;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Timestamp dt = t - state.last_t[i];
    if (dt > 0) v[i] *= std::exp(-state.alpha * static_cast<double>(dt) * 1e-6);
  }
  return out;
}

// ---- display ---------------------------------------------------------------

Frame state_to_frame(const Image& loglum, Timestamp t) {
  Image out(loglum.width(), loglum.height());
  const double base = std::log(kBaseIntensity);
  const auto src = loglum.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::clamp(std::exp(src[i] + base), 0.0, 1.0);
  return Frame{std::move(out), t};
}

Frame state_to_frame(const IntegrationState& state, Timestamp t) {
  return state_to_frame(state.loglum, t);
}

Frame state_to_frame(const HighpassState& state, Timestamp t) {
  return state_to_frame(highpass_value_at(state, t), t);
}

Image bilateral_filter(const Image& image, int diameter, double sigma) {
  if (diameter < 1 || diameter % 2 == 0) throw std::invalid_argument("bilateral diameter must be odd");
  if (!(sigma > 0.0)) throw std::invalid_argument("bilateral sigma must be positive");
  const int r = diameter / 2;
  const int w = image.width(), h = image.height();
  const double sigma_range = sigma / 255.0;
  const double inv_s = 1.0 / (2.0 * sigma * sigma);
  const double inv_r = 1.0 / (2.0 * sigma_range * sigma_range);
  std::vector<double> spatial(static_cast<std::size_t>(diameter) * diameter);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      spatial[(dy + r) * diameter + dx + r] = std::exp(-(dx * dx + dy * dy) * inv_s);
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double center = image(x, y);
      double num = 0.0, den = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const double q = image(std::clamp(x + dx, 0, w - 1), yy);
          const double wgt =
              spatial[(dy + r) * diameter + dx + r] * std::exp(-(q - center) * (q - center) * inv_r);
          num += wgt * q;
          den += wgt;
        }
      }
      out(x, y) = num / den;
    }
  }
  return out;
}

// ---- learned ---------------------------------------------------------------

RecurrentState reset_state(const SensorGeometry& g, int k) {
  if (k < 0) throw std::invalid_argument("K must be >= 0");
  return RecurrentState{std::vector<Image>(static_cast<std::size_t>(k), Image(g.width, g.height, 0.5))};
}

std::pair<Frame, RecurrentState> e2v_step(RecurrentState state, const EventTensor& tensor,
                                          const nn::NetworkWeights& weights, Timestamp t) {
  const auto& g = tensor.grid.geometry();
  const NetworkInput input = stack_input(tensor, std::span<const Image>(state.frames));
  nn::Tensor4 x(1, input.stack.channels(), g.height, g.width);
  std::copy(input.stack.values().begin(), input.stack.values().end(), x.values().begin());
  const nn::Tensor4 y = nn::unet_infer(x, weights);
  Image out(g.width, g.height);
  std::copy(y.values().begin(), y.values().end(), out.values().begin());
  if (!state.frames.empty()) {
    std::rotate(state.frames.begin(), state.frames.begin() + 1, state.frames.end());
    state.frames.back() = out;
  }
  return {Frame{std::move(out), t}, std::move(state)};
}

// ---- drivers ---------------------------------------------------------------

Method parse_method(const std::string& name) {
  if (name == "integrate") return Method::integrate;
  if (name == "highpass") return Method::highpass;
  if (name == "e2v") return Method::e2v;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::integrate: return "integrate";
    case Method::highpass: return "highpass";
    case Method::e2v: return "e2v";
  }
  return "?";
}

namespace {

std::vector<Timestamp> window_end_times(const EventStream& stream, std::size_t n) {
  std::vector<Timestamp> times;
  for (const auto& w : window_by_count(stream, n)) times.push_back(w.t_last());
  return times;
}

template <typename State, typename Apply, typename Render>
std::vector<Frame> run_baseline(const EventStream& stream, const std::vector<Timestamp>& times,
                                State state, Apply&& apply, Render&& render) {
  std::vector<Frame> frames;
  frames.reserve(times.size());
  std::size_t next = 0;
  for (Timestamp t : times) {
    while (next < stream.events.size() && stream.events[next].t <= t) apply(state, stream.events[next++]);
    frames.push_back(render(state, t));
  }
  return frames;
}

}  // namespace

std::vector<Frame> reconstruct(const EventStream& stream, const ReconstructionOptions& options) {
  const auto& g = stream.geometry;
  if (options.method == Method::e2v) {
    if (!options.weights) throw std::invalid_argument("e2v reconstruction requires weights");
    const auto& cfg = options.weights->config;
    if (cfg.bins != options.bins) {
      throw ConfigError("network expects B=" + std::to_string(cfg.bins) + ", got B=" +
                        std::to_string(options.bins));
    }
    RecurrentState state = reset_state(g, cfg.recurrent_frames);
    std::vector<Frame> frames;
    for (const auto& window : window_by_count(stream, options.window_size)) {
      const EventTensor tensor = voxelize(window, options.bins, g);
      auto [frame, next] = e2v_step(std::move(state), tensor, *options.weights, window.t_last());
      frames.push_back(std::move(frame));
      state = std::move(next);
    }
    return frames;
  }

  const auto times = options.frame_times ? *options.frame_times
                                         : window_end_times(stream, options.window_size);
  if (options.method == Method::integrate) {
    return run_baseline(
        stream, times, IntegrationState::zero(g, options.threshold),
        [](IntegrationState& s, const Event& e) { s.loglum.values()[e.y * s.loglum.width() + e.x] += e.p * s.c; },
        [](const IntegrationState& s, Timestamp t) { return state_to_frame(s, t); });
  }
  const bool filter = options.bilateral;
  return run_baseline(
      stream, times, HighpassState::zero(g, options.alpha, options.threshold),
      [](HighpassState& s, const Event& e) { highpass_update(s, e); },
      [filter](const HighpassState& s, Timestamp t) {
        Frame f = state_to_frame(s, t);
        if (filter) f.image = bilateral_filter(f.image);
        return f;
      });
}

}  // namespace evrecon
