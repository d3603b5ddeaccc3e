#include "evrecon/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "evrecon/errors.hpp"
#include "evrecon/parallel.hpp"

namespace evrecon {

// ---- thresholds ------------------------------------------------------------

ContrastThresholds::ContrastThresholds(double pos, double neg) : c_pos(pos), c_neg(neg) {
  if (!(pos >= kThresholdFloor) || !(neg >= kThresholdFloor)) {
    throw std::invalid_argument("contrast thresholds must be >= 0.01");
  }
}

double clamp_threshold(double raw) { return std::max(raw, kThresholdFloor); }

ContrastThresholds sample_thresholds(std::mt19937_64& rng, double mean, double stddev) {
  std::normal_distribution<double> normal(mean, stddev);
  const double pos = clamp_threshold(normal(rng));
  const double neg = clamp_threshold(normal(rng));
  return {pos, neg};
}

// ---- textures --------------------------------------------------------------

namespace {

double smoothstep(double f) { return f * f * (3.0 - 2.0 * f); }

}  // namespace

PlanarScene make_procedural_scene(int size, std::uint64_t seed, double min_intensity) {
  if (size < 2) throw std::invalid_argument("texture size must be >= 2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image acc(size, size, 0.0);
  double amplitude = 1.0;
  for (int cells : {3, 6, 12, 24}) {
    const int n = cells + 1;
    std::vector<double> lattice(static_cast<std::size_t>(n) * n);
    for (auto& v : lattice) v = uni(rng);
    const double step = static_cast<double>(cells) / (size - 1);
    for (int y = 0; y < size; ++y) {
      const double gy = y * step;
      const int iy = std::min(static_cast<int>(gy), cells - 1);
      const double fy = smoothstep(gy - iy);
      for (int x = 0; x < size; ++x) {
        const double gx = x * step;
        const int ix = std::min(static_cast<int>(gx), cells - 1);
        const double fx = smoothstep(gx - ix);
        const double v00 = lattice[iy * n + ix], v01 = lattice[iy * n + ix + 1];
        const double v10 = lattice[(iy + 1) * n + ix], v11 = lattice[(iy + 1) * n + ix + 1];
        const double top = v00 + fx * (v01 - v00);
        const double bot = v10 + fx * (v11 - v10);
        acc(x, y) += amplitude * (top + fy * (bot - top));
      }
    }
    amplitude *= 0.6;
  }
  const auto vals = acc.values();
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const double range = std::max(*hi - *lo, 1e-12);
  const double lo_v = *lo;
  PlanarScene scene{Image(size, size)};
  auto out = scene.log_texture.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double unit = (vals[i] - lo_v) / range;
    out[i] = std::log(min_intensity + (1.0 - min_intensity) * unit);
  }
  return scene;
}

PlanarScene scene_from_image(const Image& intensity, double min_intensity) {
  PlanarScene scene{Image(intensity.width(), intensity.height())};
  auto out = scene.log_texture.values();
  const auto in = intensity.values();
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::log(std::clamp(in[i], min_intensity, 1.0));
  }
  return scene;
}

// ---- homographies ----------------------------------------------------------

Homography Homography::translation(double dx, double dy) {
  return Homography{{1, 0, dx, 0, 1, dy, 0, 0, 1}};
}

Homography Homography::operator*(const Homography& rhs) const {
  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += m[r * 3 + k] * rhs.m[k * 3 + c];
      out.m[r * 3 + c] = s;
    }
  }
  return out;
}

double Homography::determinant() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

std::array<double, 2> Homography::apply(double x, double y) const {
  const double u = m[0] * x + m[1] * y + m[2];
  const double v = m[3] * x + m[4] * y + m[5];
  const double w = m[6] * x + m[7] * y + m[8];
  return {u / w, v / w};
}

MotionTrajectory::MotionTrajectory(Homography sensor_to_centered, Homography centered_to_texture,
                                   std::array<double, 8> velocity,
                                   std::array<double, 8> acceleration, double duration)
    : pre_(sensor_to_centered), post_(centered_to_texture), velocity_(velocity),
      acceleration_(acceleration), duration_(duration) {
  if (!(duration > 0.0)) throw std::invalid_argument("trajectory duration must be positive");
}

MotionTrajectory MotionTrajectory::fixed(const Homography& h, double duration) {
  return MotionTrajectory(Homography::identity(), h, {}, {}, duration);
}

Homography MotionTrajectory::at(double t) const {
  constexpr double kSlack = 1e-9;
  if (!(t >= -kSlack && t <= duration_ + kSlack)) {
    throw std::out_of_range("time " + std::to_string(t) + " s outside trajectory [0, " +
                            std::to_string(duration_) + "]");
  }
  Homography p;
  for (int i = 0; i < 8; ++i) p.m[i] += velocity_[i] * t + acceleration_[i] * t * t;
  return post_ * p * pre_;
}

MotionTrajectory random_trajectory(const SensorGeometry& sensor, const Image& texture,
                                   double duration, const TrajectoryBounds& bounds,
                                   std::mt19937_64& rng) {
  const auto pre = Homography::translation(-(sensor.width - 1) / 2.0, -(sensor.height - 1) / 2.0);
  const auto post =
      Homography::translation((texture.width() - 1) / 2.0, (texture.height() - 1) / 2.0);
  const std::array<double, 8> scale{bounds.linear,      bounds.linear, bounds.translation,
                                    bounds.linear,      bounds.linear, bounds.translation,
                                    bounds.perspective, bounds.perspective};
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const double hw = (sensor.width - 1) / 2.0, hh = (sensor.height - 1) / 2.0;
  for (int attempt = 0;; ++attempt) {
    std::array<double, 8> vel{}, acc{};
    for (int i = 0; i < 8; ++i) vel[i] = scale[i] * uni(rng);
    for (int i = 0; i < 8; ++i) acc[i] = 0.5 * scale[i] * uni(rng);
    MotionTrajectory traj(pre, post, vel, acc, duration);
    bool ok = true;
    for (int s = 0; s <= 20 && ok; ++s) {
      Homography p;
      const double t = duration * s / 20.0;
      for (int i = 0; i < 8; ++i) p.m[i] += vel[i] * t + acc[i] * t * t;
      const double det2 = p.m[0] * p.m[4] - p.m[1] * p.m[3];
      ok = det2 > 0.3;
      for (double cx : {-hw, hw}) {
        for (double cy : {-hh, hh}) ok = ok && (p.m[6] * cx + p.m[7] * cy + 1.0) > 0.5;
      }
    }
    if (ok || attempt > 1000) return traj;
  }
}

// ---- rendering -------------------------------------------------------------

Image render_log_image(const PlanarScene& scene, const Homography& h, const SensorGeometry& g) {
  const Image& tex = scene.log_texture;
  const int tw = tex.width(), th = tex.height();
  if (tw < 1 || th < 1) throw DataError("empty texture");
  Image out(g.width, g.height);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      auto [u, v] = h.apply(x, y);
      u = std::clamp(u, 0.0, static_cast<double>(tw - 1));
      v = std::clamp(v, 0.0, static_cast<double>(th - 1));
      const int x0 = std::min(static_cast<int>(u), tw - 1);
      const int y0 = std::min(static_cast<int>(v), th - 1);
      const int x1 = std::min(x0 + 1, tw - 1);
      const int y1 = std::min(y0 + 1, th - 1);
      const double fx = u - x0, fy = v - y0;
      const double top = tex(x0, y0) + fx * (tex(x1, y0) - tex(x0, y0));
      const double bot = tex(x0, y1) + fx * (tex(x1, y1) - tex(x0, y1));
      out(x, y) = top + fy * (bot - top);
    }
  }
  return out;
}

Frame render_frame(const PlanarScene& scene, const MotionTrajectory& trajectory, double t,
                   const SensorGeometry& g) {
  Image img = render_log_image(scene, trajectory.at(t), g);
  for (auto& v : img.values()) v = std::clamp(std::exp(v), 0.0, 1.0);
  return Frame{std::move(img), static_cast<Timestamp>(std::llround(t * 1e6))};
}

// ---- event simulation ------------------------------------------------------

EventSimulator::EventSimulator(SensorGeometry geometry, ContrastThresholds thresholds)
    : geometry_(geometry), thresholds_(thresholds) {}

namespace {

void require_finite(const Image& img) {
  for (double v : img.values()) {
    if (!std::isfinite(v)) throw DataError("non-finite log brightness");
  }
}

}  // namespace

void EventSimulator::reset(const Image& log_image, double t_seconds) {
  if (log_image.geometry() != geometry_) throw ShapeError("log image does not match sensor");
  require_finite(log_image);
  reference_ = log_image;
  last_ = log_image;
  last_t_ = t_seconds;
  initialized_ = true;
}

void EventSimulator::advance(const Image& log_image, double t_seconds, std::vector<Event>& out) {
  if (!initialized_) {
    reset(log_image, t_seconds);
    return;
  }
  if (log_image.geometry() != geometry_) throw ShapeError("log image does not match sensor");
  if (!(t_seconds > last_t_)) throw std::invalid_argument("simulation time must increase");
  require_finite(log_image);

  // Absorbs rounding when a level lands exactly on a segment endpoint.
  constexpr double kLevelSlack = 1e-12;
  const double dt = t_seconds - last_t_;
  const double cp = thresholds_.c_pos, cn = thresholds_.c_neg;
  for (int y = 0; y < geometry_.height; ++y) {
    for (int x = 0; x < geometry_.width; ++x) {
      const double l0 = last_(x, y);
      const double l1 = log_image(x, y);
      if (l1 == l0) continue;
      double& ref = reference_(x, y);
      const double inv_span = 1.0 / (l1 - l0);
      const bool up = l1 > l0;
      const double step = up ? cp : -cn;
      for (;;) {
        const double level = ref + step;
        if (up ? level > l1 + kLevelSlack : level < l1 - kLevelSlack) break;
        const double frac = std::clamp((level - l0) * inv_span, 0.0, 1.0);
        const double t = last_t_ + frac * dt;
        out.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                            static_cast<Timestamp>(std::llround(t * 1e6)),
                            static_cast<std::int8_t>(up ? 1 : -1)});
        ref = level;
      }
    }
  }
  last_ = log_image;
  last_t_ = t_seconds;
}

void sort_events_canonical(std::vector<Event>& events) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.p < b.p;
  });
}

void SimConfig::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("duration must be positive");
  if (!(gt_rate >= 1.0)) throw std::invalid_argument("gt_rate must be >= 1");
  if (!(render_rate >= gt_rate)) throw std::invalid_argument("render_rate must be >= gt_rate");
  if (!(threshold_std >= 0.0)) throw std::invalid_argument("threshold_std must be >= 0");
  if (texture_size < 2) throw std::invalid_argument("texture_size must be >= 2");
}

SimulationResult generate_events(const PlanarScene& scene, const MotionTrajectory& trajectory,
                                 const ContrastThresholds& thresholds, const SimConfig& config) {
  config.validate();
  const auto& g = config.geometry;
  SimulationResult result;
  result.events.geometry = g;

  const auto renders = static_cast<long long>(std::llround(config.duration * config.render_rate));
  EventSimulator sim(g, thresholds);
  auto& events = result.events.events;
  for (long long j = 0; j <= renders; ++j) {
    const double t = std::min(static_cast<double>(j) / config.render_rate, config.duration);
    const Image log_img = render_log_image(scene, trajectory.at(t), g);
    if (j == 0) {
      sim.reset(log_img, t);
    } else {
      sim.advance(log_img, t, events);
    }
  }
  sort_events_canonical(events);

  const auto gt_count = static_cast<long long>(std::floor(config.duration * config.gt_rate + 1e-9));
  result.frames.reserve(static_cast<std::size_t>(gt_count + 1));
  for (long long k = 0; k <= gt_count; ++k) {
    const double t = std::min(static_cast<double>(k) / config.gt_rate, config.duration);
    result.frames.push_back(render_frame(scene, trajectory, t, g));
  }
  return result;
}

// ---- datasets --------------------------------------------------------------

std::uint64_t sequence_seed(std::uint64_t dataset_seed, std::size_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = dataset_seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

std::vector<std::filesystem::path> list_textures(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (ec) throw DataError("cannot read texture directory " + dir.string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .pgm textures in " + dir.string());
  return files;
}

std::string sequence_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "seq_%05zu", i);
  return buf;
}

void write_meta(const std::filesystem::path& path, const SequenceEntry& entry,
                const SimConfig& config) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "c_pos=" << entry.thresholds.c_pos << '\n'
      << "c_neg=" << entry.thresholds.c_neg << '\n'
      << "seed=" << entry.seed << '\n'
      << "width=" << config.geometry.width << '\n'
      << "height=" << config.geometry.height << '\n'
      << "duration=" << config.duration << '\n'
      << "render_rate=" << config.render_rate << '\n'
      << "gt_rate=" << config.gt_rate << '\n'
      << "events=" << entry.event_count << '\n'
      << "frames=" << entry.frame_count << '\n';
}

}  // namespace

DatasetManifest generate_dataset(const SimConfig& config, const TextureSource& textures,
                                 std::size_t count, const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw DataError("cannot create dataset directory " + out_dir.string());
  }
  std::vector<std::filesystem::path> texture_files;
  if (!textures.image_dir.empty()) texture_files = list_textures(textures.image_dir);

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.geometry = config.geometry;
  manifest.sequences.resize(count);

  parallel_for(count, [&](std::size_t i) {
    SequenceEntry& entry = manifest.sequences[i];
    entry.name = sequence_name(i);
    entry.seed = sequence_seed(config.seed, i);
    std::mt19937_64 rng(entry.seed);
    entry.thresholds = sample_thresholds(rng, config.threshold_mean, config.threshold_std);
    PlanarScene scene;
    if (texture_files.empty()) {
      scene = make_procedural_scene(config.texture_size, rng());
    } else {
      scene = scene_from_image(read_pgm(texture_files[rng() % texture_files.size()]));
    }
    const auto traj =
        random_trajectory(config.geometry, scene.log_texture, config.duration, config.bounds, rng);
    const auto sim = generate_events(scene, traj, entry.thresholds, config);
    const auto dir = out_dir / entry.name;
    std::filesystem::create_directories(dir);
    save_events(dir / "events.bin", sim.events);
    write_frame_sequence(dir, sim.frames);
    entry.event_count = sim.events.size();
    entry.frame_count = sim.frames.size();
    write_meta(dir / "meta.txt", entry, config);
  });

  std::ofstream out(out_dir / "manifest.txt");
  if (!out) throw DataError("cannot write manifest in " + out_dir.string());
  out.precision(17);
  out << "# evrecon dataset v1\n";
  out << "geometry " << config.geometry.width << ' ' << config.geometry.height << '\n';
  out << "# name events frames c_pos c_neg seed\n";
  for (const auto& e : manifest.sequences) {
    out << e.name << ' ' << e.event_count << ' ' << e.frame_count << ' ' << e.thresholds.c_pos
        << ' ' << e.thresholds.c_neg << ' ' << e.seed << '\n';
  }
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
  const auto path = dataset_dir / "manifest.txt";
  std::ifstream in(path);
  if (!in) throw DataError("missing " + path.string());
  DatasetManifest manifest;
  manifest.root = dataset_dir;
  std::string line;
  bool have_geometry = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "geometry") {
      int w = 0, h = 0;
      if (!(ls >> w >> h) || w < 1 || h < 1) throw DataError("bad geometry in " + path.string());
      manifest.geometry = SensorGeometry(w, h);
      have_geometry = true;
      continue;
    }
    SequenceEntry e;
    e.name = head;
    if (!(ls >> e.event_count >> e.frame_count >> e.thresholds.c_pos >> e.thresholds.c_neg >>
          e.seed)) {
      throw DataError("bad manifest line '" + line + "'");
    }
    manifest.sequences.push_back(std::move(e));
  }
  if (!have_geometry) throw DataError("manifest without geometry: " + path.string());
  return manifest;
}

}  // namespace evrecon
