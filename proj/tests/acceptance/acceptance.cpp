// Acceptance suite: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "evrecon/cli.hpp"
#include "evrecon/evalmetrics.hpp"
#include "evrecon/event_core.hpp"
#include "evrecon/nn/train.hpp"
#include "evrecon/nn/weights_io.hpp"
#include "evrecon/reconstructors.hpp"
#include "evrecon/simulator.hpp"
#include "evrecon/tensorizer.hpp"
#include "metric_oracles.hpp"
#include "nn_checks.hpp"

using namespace evrecon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  fs::path workdir;
  // criterion 5
  int train_sequences = 40;
  int heldout_sequences = 8;
  double duration = 6.0;
  int epochs = 60;
  int batch = 4;
  double lr = 1e-3;
  double warmup = 0.5;
  std::uint64_t seed = 1;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "evpipe");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::vector<Event> random_window(std::mt19937_64& rng, std::size_t n, const SensorGeometry& g) {
  std::uniform_int_distribution<int> xd(0, g.width - 1), yd(0, g.height - 1), pd(0, 1);
  std::uniform_int_distribution<Timestamp> span(0, 200000);
  const Timestamp t0 = span(rng);
  std::uniform_int_distribution<Timestamp> td(t0, t0 + span(rng));
  std::vector<Event> ev(n);
  for (auto& e : ev) {
    e = Event{static_cast<std::uint16_t>(xd(rng)), static_cast<std::uint16_t>(yd(rng)), td(rng),
              static_cast<std::int8_t>(pd(rng) ? 1 : -1)};
  }
  std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return ev;
}

// ---- 1: voxel mass and invariances ----------------------------------------

Outcome voxel_invariants() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> nd(2, 5000);
  std::uniform_int_distribution<int> bd(1, 16);
  const SensorGeometry g(64, 48);
  double worst = 0.0;
  int perm_fail = 0, flip_fail = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = nd(rng);
    const int bins = bd(rng);
    auto ev = random_window(rng, n, g);
    const EventTensor base = voxelize(EventWindow(ev), bins, g);
    double polarity = 0.0;
    for (const auto& e : ev) polarity += e.p;
    worst = std::max(worst, std::abs(base.grid.sum() - polarity));

    auto perm = ev;
    if (n > 2) std::shuffle(perm.begin() + 1, perm.end() - 1, rng);
    if (!(voxelize(EventWindow(perm), bins, g).grid == base.grid)) ++perm_fail;

    for (auto& e : ev) e.p = static_cast<std::int8_t>(-e.p);
    const EventTensor flipped = voxelize(EventWindow(ev), bins, g);
    const auto a = flipped.grid.values(), b = base.grid.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != -b[i]) {
        ++flip_fail;
        break;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-9 && perm_fail == 0 && flip_fail == 0 && secs < 10.0;
  return {pass, "max |sum - sum p| = " + fmt("%.3g", worst) + ", permutation failures " +
                    std::to_string(perm_fail) + ", flip failures " + std::to_string(flip_fail) +
                    ", " + fmt("%.2f", secs) + " s"};
}

// ---- 2: gradients -----------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  double layer = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    layer = std::max({layer, checks::check_conv(seed), checks::check_transposed_conv(seed),
                      checks::check_batch_norm(seed), checks::check_residual_block(seed),
                      checks::check_loss(seed)});
  }
  const auto net = checks::check_unet(5);
  const double secs = seconds_since(t0);
  const bool pass = layer < 1e-4 && net.worst < 1e-3 && net.kinked * 20 < net.checked && secs < 120.0;
  return {pass, "layers max rel err " + fmt("%.3g", layer) + ", tiny UNet " + fmt("%.3g", net.worst) +
                    " over " + std::to_string(net.checked - net.kinked) + " coordinates (" +
                    std::to_string(net.kinked) + " straddle a ReLU kink), " + fmt("%.1f", secs) + " s"};
}

// ---- 3: adjoint -------------------------------------------------------------

Outcome adjoint() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) worst = std::max(worst, checks::adjoint_gap(1000 + seed));
  return {worst < 1e-9, "max |<conv x, y> - <x, conv^T y>| = " + fmt("%.3g", worst) + " over 50 draws"};
}

// ---- 4: simulator / integration oracle -------------------------------------

Outcome integration_oracle() {
  const auto t0 = Clock::now();
  SimConfig cfg;
  cfg.geometry = SensorGeometry(64, 64);
  cfg.duration = 2.0;
  const auto& g = cfg.geometry;
  double worst_excess = -1e9;  // max over pixels of err - (c + 2 tol)
  double worst_err = 0.0;
  std::size_t checks_done = 0;
  for (int s = 0; s < 10; ++s) {
    std::mt19937_64 rng(500 + s);
    const double c = std::uniform_real_distribution<double>(0.1, 0.3)(rng);
    const PlanarScene scene = make_procedural_scene(cfg.texture_size, 900 + s);
    const MotionTrajectory traj = random_trajectory(g, scene.log_texture, cfg.duration, cfg.bounds, rng);
    const SimulationResult sim = generate_events(scene, traj, ContrastThresholds(c, c), cfg);

    // interpolation tolerance: largest log change over one microsecond
    const auto renders = static_cast<int>(std::llround(cfg.duration * cfg.render_rate));
    double step = 0.0;
    Image prev = render_log_image(scene, traj.at(0.0), g);
    const Image l0 = prev;
    for (int j = 1; j <= renders; ++j) {
      const Image cur = render_log_image(scene, traj.at(j / cfg.render_rate), g);
      for (std::size_t i = 0; i < cur.size(); ++i) step = std::max(step, std::abs(cur.values()[i] - prev.values()[i]));
      prev = cur;
    }
    const double tol = step * cfg.render_rate * 1e-6;

    IntegrationState state = IntegrationState::zero(g, c);
    const auto& ev = sim.events.events;
    std::size_t next = 0;
    for (const Frame& f : sim.frames) {
      std::size_t end = next;
      while (end < ev.size() && ev[end].t <= f.t) ++end;
      integrate_in_place(state, std::span<const Event>(ev.data() + next, end - next));
      next = end;
      const Image lt = render_log_image(scene, traj.at(static_cast<double>(f.t) * 1e-6), g);
      for (std::size_t i = 0; i < lt.size(); ++i) {
        const double err = std::abs(state.loglum.values()[i] - (lt.values()[i] - l0.values()[i]));
        worst_err = std::max(worst_err, err / c);
        worst_excess = std::max(worst_excess, err - (c + 2 * tol));
        ++checks_done;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_excess <= 0.0 && secs < 60.0;
  return {pass, "max error " + fmt("%.4f", worst_err) + " c over " + std::to_string(checks_done) +
                    " pixel-frames, bound margin " + fmt("%.3g", -worst_excess) + ", " + fmt("%.1f", secs) + " s"};
}

// ---- 5: desk-scale training -------------------------------------------------

double mean_mse(const std::vector<SequenceMetrics>& rows) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.empty) continue;
    sum += r.mse;
    ++n;
  }
  return n ? sum / n : std::nan("");
}

Outcome desk_training(const Settings& s) {
  const auto t0 = Clock::now();
  constexpr std::size_t kWindow = 2000;
  constexpr int kBins = 5, kFrames = 2, kUnroll = 8;

  SimConfig cfg;
  cfg.geometry = SensorGeometry(64, 64);
  cfg.duration = s.duration;
  cfg.seed = s.seed;
  const DatasetManifest train_set =
      generate_dataset(cfg, TextureSource::procedural(), s.train_sequences, s.workdir / "train");
  cfg.seed = s.seed + 7919;
  const DatasetManifest heldout =
      generate_dataset(cfg, TextureSource::procedural(), s.heldout_sequences, s.workdir / "heldout");

  nn::TrainConfig tc;
  tc.unroll = kUnroll;
  tc.window_size = kWindow;
  tc.learning_rate = s.lr;
  tc.batch_size = s.batch;
  tc.epochs = s.epochs;
  tc.seed = s.seed;
  const nn::TrainingSet set = nn::build_training_set(train_set, kWindow, kBins, kUnroll);
  std::cerr << "criterion 5: " << set.samples.size() << " training samples (" << fmt("%.0f", seconds_since(t0)) << " s)\n";
  const nn::TrainResult trained = nn::train(set, nn::NetConfig::tiny(kBins, kFrames), tc, [&](int e, double loss) {
    std::cerr << "  epoch " << e + 1 << " loss " << loss << " (" << fmt("%.0f", seconds_since(t0)) << " s)\n";
  });
  nn::save_weights(trained.weights, s.workdir / "tiny.e2vw");

  EvalOptions eo;
  eo.warmup = s.warmup;
  std::vector<SequenceMetrics> e2v_rows, int_rows;
  for (std::size_t i = 0; i < heldout.sequences.size(); ++i) {
    const auto dir = heldout.sequence_dir(i);
    const EventStream stream = load_events(dir / "events.bin");
    const auto gt = read_frame_sequence(dir);
    ReconstructionOptions ro;
    ro.window_size = kWindow;
    ro.bins = kBins;
    ro.method = Method::e2v;
    ro.weights = &trained.weights;
    e2v_rows.push_back(evaluate_sequence(heldout.sequences[i].name, reconstruct(stream, ro), gt, eo));
    ro.method = Method::integrate;
    ro.threshold = kNominalThreshold;
    int_rows.push_back(evaluate_sequence(heldout.sequences[i].name, reconstruct(stream, ro), gt, eo));
  }
  const double e2v = mean_mse(e2v_rows), integ = mean_mse(int_rows);
  const auto& losses = trained.epoch_loss;
  const bool have10 = losses.size() >= 10;
  const double ratio = have10 ? losses[9] / losses[0] : std::nan("");
  const double secs = seconds_since(t0);
  const bool pass = e2v < integ && have10 && ratio < 0.7 && secs < 3600.0;
  return {pass, "held-out MSE e2v " + fmt("%.4f", e2v) + " vs integration(c=0.18) " + fmt("%.4f", integ) +
                    ", epoch10/epoch1 loss " + fmt("%.3f", ratio) + ", " + std::to_string(set.samples.size()) +
                    " samples from " + std::to_string(s.train_sequences) + " sequences, " +
                    fmt("%.0f", secs) + " s"};
}

// ---- 6: throughput -----------------------------------------------------------

Outcome throughput() {
  EventStream stream;
  stream.geometry = SensorGeometry(240, 180);
  std::mt19937_64 rng(66);
  stream.events = random_window(rng, 2'000'000, stream.geometry);
  // spread over ~2 s so the leaky integrator sees realistic gaps
  for (std::size_t i = 0; i < stream.events.size(); ++i) stream.events[i].t = static_cast<Timestamp>(i);

  std::ostringstream text;
  write_event_text(text, stream);
  const std::string buffer = text.str();
  BenchMethod parse;
  parse.name = "parse+voxelize";
  parse.process = [&](const EventStream&) {
    const EventStream parsed = parse_event_text(std::string_view(buffer), stream.geometry);
    std::size_t frames = 0;
    for (const auto& w : window_by_count(parsed, kDefaultWindowSize)) {
      frames += voxelize(w, kDefaultBins, parsed.geometry).bins() > 0;
    }
    return frames;
  };
  BenchMethod hf;
  hf.name = "highpass";
  ReconstructionOptions ro;
  ro.method = Method::highpass;
  ro.bilateral = false;
  hf.process = [ro](const EventStream& s) { return reconstruct(s, ro).size(); };
  const Image gray(240, 180, 0.5);
  hf.frame_op = [&] { (void)bilateral_filter(gray); };

  const BenchReport p = throughput_bench(parse, stream, 3);
  const BenchReport h = throughput_bench(hf, stream, 3);
  const bool pass = p.mev_per_s >= 5.0 && h.mev_per_s >= 5.0;
  return {pass, "parse+voxelize " + fmt("%.2f", p.mev_per_s) + " Mev/s, highpass " + fmt("%.2f", h.mev_per_s) +
                    " Mev/s (bilateral post-filter " + fmt("%.2f", h.frame_ms) + " ms/frame)"};
}

// ---- 7: latency ----------------------------------------------------------------

double quantile_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Outcome latency(const Settings& s) {
  EventStream constant;
  constant.geometry = SensorGeometry(240, 180);
  constant.events.resize(1'000'000);
  for (std::size_t i = 0; i < constant.events.size(); ++i) {
    constant.events[i] = Event{static_cast<std::uint16_t>(i % 240), static_cast<std::uint16_t>(i / 240 % 180),
                               static_cast<Timestamp>(i), static_cast<std::int8_t>(i % 2 ? 1 : -1)};
  }
  const LatencySummary c = latency_report(constant, 25000);
  bool ok = c.min_us == 24999 && c.p25_us == 24999 && c.median_us == 24999 && c.p75_us == 24999 && c.max_us == 24999;

  // the command-line tool on the same stream
  const fs::path file = s.workdir / "constant.bin";
  save_events(file, constant);
  std::vector<std::string> args{"evpipe", "latency", "--events", file.string(), "--size", "240x180"};
  std::ostringstream out, err;
  ok = ok && run_cli(args, out, err) == 0 && out.str().find("24.999") != std::string::npos;

  int mismatches = 0;
  std::mt19937_64 rng(77);
  for (int k = 0; k < 20; ++k) {
    EventStream st;
    st.geometry = SensorGeometry(32, 32);
    st.events = random_window(rng, 5000 + 997 * k, st.geometry);
    const std::size_t n = 50 + 37 * k;
    std::vector<double> d;
    for (std::size_t i = 0; i + n <= st.events.size(); i += n) {
      d.push_back(static_cast<double>(st.events[i + n - 1].t - st.events[i].t));
    }
    const LatencySummary r = latency_report(st, n);
    const double expect[5] = {quantile_oracle(d, 0), quantile_oracle(d, 0.25), quantile_oracle(d, 0.5),
                              quantile_oracle(d, 0.75), quantile_oracle(d, 1)};
    const double got[5] = {r.min_us, r.p25_us, r.median_us, r.p75_us, r.max_us};
    if (r.windows != d.size() || !std::equal(got, got + 5, expect)) ++mismatches;
  }
  return {ok && mismatches == 0, "constant 1 Mev/s stream: " + std::to_string(c.windows) +
                                     " windows, all quantiles " + fmt("%.0f", c.median_us) +
                                     " us; random streams with oracle mismatches: " + std::to_string(mismatches)};
}

// ---- 8: metrics ----------------------------------------------------------------

Outcome metric_fidelity() {
  double worst_ssim = 0.0, worst_mse = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Image a = checks::random_image(32, 32, 2 * k + 1), b = checks::random_image(32, 32, 2 * k + 2);
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - checks::ssim_oracle(a, b)));
    worst_mse = std::max(worst_mse, std::abs(mse(a, b) - checks::mse_oracle(a, b)));
  }
  int identity_fail = 0;
  std::mt19937_64 rng(88);
  std::uniform_int_distribution<int> side(11, 64);
  for (std::uint64_t k = 0; k < 500; ++k) {
    const Image x = checks::random_image(side(rng), side(rng), 10'000 + k);
    if (ssim(x, x) != 1.0 || mse(x, x) != 0.0) ++identity_fail;
  }
  const bool pass = worst_ssim <= 1e-6 && worst_mse <= 1e-6 && identity_fail == 0;
  return {pass, "max |ssim - oracle| " + fmt("%.3g", worst_ssim) + ", max |mse - oracle| " + fmt("%.3g", worst_mse) +
                    ", identity failures " + std::to_string(identity_fail) + "/500"};
}

// ---- 9: determinism ------------------------------------------------------------

Outcome determinism(const Settings& s) {
  const fs::path root = s.workdir / "determinism";
  std::vector<std::string> sim{"simulate", "--sequences", "3", "--duration", "1", "--size", "64x64",
                               "--seed", "21", "--threads", "1", "--out"};
  auto sim_a = sim, sim_b = sim;
  sim_a.push_back((root / "a").string());
  sim_b.push_back((root / "b").string());
  if (cli(sim_a) != 0 || cli(sim_b) != 0) return {false, "simulate failed"};
  bool events_same = true;
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "seq_%05d", i);
    events_same = events_same && read_bytes(root / "a" / name / "events.bin") == read_bytes(root / "b" / name / "events.bin") &&
                  !read_bytes(root / "a" / name / "events.bin").empty();
  }

  std::vector<std::string> tr{"train", "--data", (root / "a").string(), "--preset", "tiny", "--bins", "5",
                              "--recurrent-frames", "2", "--window", "500", "--unroll", "4", "--epochs", "2",
                              "--batch", "2", "--seed", "3", "--threads", "1", "--out"};
  auto tr_a = tr, tr_b = tr;
  tr_a.push_back((root / "wa.e2vw").string());
  tr_b.push_back((root / "wb.e2vw").string());
  if (cli(tr_a) != 0 || cli(tr_b) != 0) return {false, "train failed"};
  const bool weights_same = read_bytes(root / "wa.e2vw") == read_bytes(root / "wb.e2vw");
  return {events_same && weights_same, std::string("event files ") + (events_same ? "identical" : "differ") +
                                           ", weight files " + (weights_same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Settings s;
  std::vector<int> only;
  std::string workdir;
  bool keep = false;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  app.add_option("--workdir", workdir, "Scratch directory (default: a fresh temp dir)");
  app.add_flag("--keep", keep, "Keep the scratch directory");
  app.add_option("--train-sequences", s.train_sequences)->capture_default_str();
  app.add_option("--heldout-sequences", s.heldout_sequences)->capture_default_str();
  app.add_option("--duration", s.duration)->capture_default_str();
  app.add_option("--epochs", s.epochs)->capture_default_str();
  app.add_option("--batch", s.batch)->capture_default_str();
  app.add_option("--lr", s.lr)->capture_default_str();
  app.add_option("--warmup", s.warmup)->capture_default_str();
  app.add_option("--seed", s.seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  s.workdir = workdir.empty() ? fs::temp_directory_path() / ("evrecon_acceptance_" + std::to_string(::getpid()))
                              : fs::path(workdir);
  fs::create_directories(s.workdir);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, voxel_invariants},
      {2, gradients},
      {3, adjoint},
      {4, integration_oracle},
      {5, [&] { return desk_training(s); }},
      {6, throughput},
      {7, [&] { return latency(s); }},
      {8, metric_fidelity},
      {9, [&] { return determinism(s); }},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
  }
  if (!keep && workdir.empty()) fs::remove_all(s.workdir);
  return failures == 0 ? 0 : 1;
}
