#include "evrecon/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "evrecon/errors.hpp"
#include "evrecon/evalmetrics.hpp"
#include "evrecon/event_core.hpp"
#include "evrecon/image.hpp"
#include "evrecon/nn/train.hpp"
#include "evrecon/nn/weights_io.hpp"
#include "evrecon/parallel.hpp"
#include "evrecon/reconstructors.hpp"
#include "evrecon/simulator.hpp"
#include "evrecon/tensorizer.hpp"

namespace fs = std::filesystem;

namespace evrecon {

namespace {

SensorGeometry parse_size(const std::string& text) {
  int w = 0, h = 0;
  char x = 0, extra = 0;
  std::istringstream in(text);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || (in >> extra)) {
    throw CLI::ValidationError("--size", "expected WxH, got '" + text + "'");
  }
  return SensorGeometry(w, h);
}

std::vector<Timestamp> read_timestamps(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Timestamp> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(std::stoll(line));
    } catch (const std::exception&) {
      throw DataError("bad timestamp '" + line + "' in " + path.string());
    }
  }
  return out;
}

// Options shared by every subcommand.
struct Common {
  std::string config;
  bool dump_config = false;
};

const std::vector<std::string> kSubcommands{"simulate", "voxelize", "reconstruct", "train",
                                            "eval",     "bench",    "latency"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Splices `--key=value` tokens from a config file in front of the subcommand's
// own arguments, so anything given on the command line is parsed later and wins.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::size_t sub = args.size();
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (sub == args.size() &&
        std::find(kSubcommands.begin(), kSubcommands.end(), args[i]) != kSubcommands.end()) {
      sub = i;
    } else if (sub < i && args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (sub < i && args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  std::vector<std::string> injected;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key == "config" || key == "dump-config") continue;
    if (value == "true") {
      injected.push_back("--" + key);
    } else if (value != "false") {
      injected.push_back("--" + key + "=" + value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + sub + 1);
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + sub + 1, args.end());
  return out;
}

void add_common(CLI::App* sub, Common& c) {
  // consumed by expand_config before parsing
  sub->add_option("--config", c.config, "key=value file supplying any flag; command line wins");
  sub->add_flag("--dump-config", c.dump_config, "Print the effective configuration and exit");
  sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  Common common;
  std::string out;
  std::size_t sequences = 40;
  double duration = 2.0;
  std::string size = "64x64";
  std::uint64_t seed = 0;
  double render_rate = 1000.0;
  double gt_rate = 500.0;
  double threshold_mean = kThresholdMean;
  double threshold_std = kThresholdStd;
  int texture_size = 256;
  std::string textures;
  TrajectoryBounds bounds;
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg;
  cfg.geometry = parse_size(a.size);
  cfg.duration = a.duration;
  cfg.render_rate = a.render_rate;
  cfg.gt_rate = a.gt_rate;
  cfg.threshold_mean = a.threshold_mean;
  cfg.threshold_std = a.threshold_std;
  cfg.seed = a.seed;
  cfg.texture_size = a.texture_size;
  cfg.bounds = a.bounds;
  TextureSource tex;
  tex.image_dir = a.textures;
  const auto manifest = generate_dataset(cfg, tex, a.sequences, a.out);
  std::size_t events = 0, frames = 0;
  for (const auto& s : manifest.sequences) {
    events += s.event_count;
    frames += s.frame_count;
  }
  out << "wrote " << manifest.sequences.size() << " sequences to " << a.out << " (" << events
      << " events, " << frames << " frames)\n";
  return kExitOk;
}

// ---- voxelize --------------------------------------------------------------

struct VoxelizeArgs {
  Common common;
  std::string events;
  std::string size = "240x180";
  std::string out;
  std::size_t window = kDefaultWindowSize;
  int bins = kDefaultBins;
  std::size_t index = 0;
};

int run_voxelize(const VoxelizeArgs& a, std::ostream& out) {
  const EventStream stream = load_events(a.events, parse_size(a.size));
  const auto windows = window_by_count(stream, a.window);
  if (a.index >= windows.size()) {
    throw DataError("window " + std::to_string(a.index) + " requested, stream has " +
                    std::to_string(windows.size()) + " windows of " + std::to_string(a.window));
  }
  const EventTensor t = voxelize(windows[a.index], a.bins, stream.geometry);
  std::ofstream f(a.out, std::ios::binary);
  if (!f) throw DataError("cannot write " + a.out);
  write_tensor_dump(f, t);
  out << "window " << a.index << ": " << t.bins() << "x" << stream.geometry.height << "x"
      << stream.geometry.width << " sum " << t.grid.sum() << '\n';
  return kExitOk;
}

// ---- reconstruct -----------------------------------------------------------

struct ReconstructArgs {
  Common common;
  std::string method = "integrate";
  std::string events;
  std::string size = "240x180";
  std::string out;
  std::string weights;
  std::string frame_times;
  std::size_t window = kDefaultWindowSize;
  int bins = kDefaultBins;
  int recurrent_frames = -1;
  double threshold = kNominalThreshold;
  double alpha = kDefaultHighpassAlpha;
  bool no_bilateral = false;
};

int run_reconstruct(const ReconstructArgs& a, const CLI::App& sub, std::ostream& out) {
  ReconstructionOptions opt;
  opt.method = parse_method(a.method);
  opt.window_size = a.window;
  opt.bins = a.bins;
  opt.threshold = a.threshold;
  opt.alpha = a.alpha;
  opt.bilateral = !a.no_bilateral;
  std::optional<nn::NetworkWeights> weights;
  if (opt.method == Method::e2v) {
    if (a.weights.empty()) throw CLI::RequiredError("--weights is required for --method e2v");
    weights = nn::load_weights(a.weights);
    // B and K are inherited from the weight file unless given explicitly.
    const int bins = sub.count("--bins") ? a.bins : weights->config.bins;
    const int k = a.recurrent_frames >= 0 ? a.recurrent_frames : weights->config.recurrent_frames;
    nn::require_compatible(weights->config, bins, k);
    opt.bins = bins;
    opt.weights = &*weights;
  } else if (!a.frame_times.empty()) {
    opt.frame_times = read_timestamps(a.frame_times);
  }
  const EventStream stream = load_events(a.events, parse_size(a.size));
  const auto frames = reconstruct(stream, opt);
  write_frame_sequence(a.out, frames);
  out << method_name(opt.method) << ": " << frames.size() << " frames from " << stream.size()
      << " events -> " << a.out << '\n';
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string data;
  std::string out;
  std::string loss_csv;
  std::string preset = "full";
  int base_channels = 64;
  int encoders = 4;
  int residual_blocks = 2;
  int bins = kDefaultBins;
  int recurrent_frames = 3;
  nn::TrainConfig train;
  std::string checkpoint;
};

int run_train(const TrainArgs& a, const CLI::App& sub, std::ostream& out) {
  nn::NetConfig net = a.preset == "tiny" ? nn::NetConfig::tiny(a.bins, a.recurrent_frames)
                                         : nn::NetConfig::full();
  if (a.preset != "tiny" || sub.count("--base-channels")) net.base_channels = a.base_channels;
  if (a.preset != "tiny" || sub.count("--encoders")) net.encoders = a.encoders;
  if (a.preset != "tiny" || sub.count("--residual-blocks")) net.residual_blocks = a.residual_blocks;
  net.bins = a.bins;
  net.recurrent_frames = a.recurrent_frames;
  net.validate();

  nn::TrainConfig cfg = a.train;
  cfg.checkpoint_path = a.checkpoint.empty() ? fs::path(a.out + ".ckpt") : fs::path(a.checkpoint);
  const auto manifest = read_manifest(a.data);
  std::ofstream csv;
  if (!a.loss_csv.empty()) {
    csv.open(a.loss_csv);
    if (!csv) throw DataError("cannot write " + a.loss_csv);
    csv << "epoch,loss\n";
  }
  const auto result = nn::train(manifest, net, cfg, [&](int epoch, double loss) {
    char line[64];
    std::snprintf(line, sizeof line, "epoch %d loss %.6f\n", epoch + 1, loss);
    out << line << std::flush;
    if (csv) csv << epoch + 1 << ',' << loss << '\n';
  });
  nn::save_weights(result.weights, a.out);
  out << "saved " << a.out << '\n';
  return kExitOk;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::vector<std::string> recon;
  std::string gt;
  std::string csv;
  EvalOptions options;
};

int run_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<std::string> names;  // sequence subdirectories, or one flat sequence
  const fs::path gt_root(a.gt);
  const bool dataset = fs::exists(gt_root / "manifest.txt");
  if (dataset) {
    for (const auto& s : read_manifest(gt_root).sequences) names.push_back(s.name);
  } else {
    names.push_back(gt_root.filename().empty() ? gt_root.parent_path().filename().string()
                                               : gt_root.filename().string());
  }
  std::vector<MethodResults> results;
  for (const auto& spec : a.recon) {
    const auto eq = spec.find('=');
    MethodResults mr;
    fs::path dir = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
    mr.method = eq == std::string::npos ? (dir.filename().empty() ? dir.parent_path().filename().string()
                                                                  : dir.filename().string())
                                        : spec.substr(0, eq);
    for (const auto& name : names) {
      const auto gt = read_frame_sequence(dataset ? gt_root / name : gt_root);
      const auto recon = read_frame_sequence(dataset ? dir / name : dir);
      mr.sequences.push_back(evaluate_sequence(name, recon, gt, a.options));
    }
    results.push_back(std::move(mr));
  }
  const MetricsTable table = aggregate_table(std::move(results));
  out << table.to_text();
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw DataError("cannot write " + a.csv);
    f << table.to_csv();
  }
  return kExitOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  Common common;
  std::string events;
  std::string size = "240x180";
  std::vector<std::string> methods{"parse", "integrate", "highpass"};
  std::string weights;
  std::size_t window = kDefaultWindowSize;
  int bins = kDefaultBins;
  int reps = 5;
  std::string csv;
};

int run_bench(const BenchArgs& a, std::ostream& out) {
  const EventStream stream = load_events(a.events, parse_size(a.size));
  std::vector<BenchReport> reports;
  std::optional<nn::NetworkWeights> weights;
  for (const auto& m : a.methods) {
    BenchMethod bm;
    if (m == "parse") {
      std::ostringstream text;
      write_event_text(text, stream);
      auto buffer = std::make_shared<std::string>(text.str());
      bm.name = "parse+voxelize";
      bm.process = [buffer, g = stream.geometry, n = a.window, b = a.bins](const EventStream&) {
        const EventStream parsed = parse_event_text(std::string_view(*buffer), g);
        std::size_t frames = 0;
        for (const auto& w : window_by_count(parsed, n)) {
          frames += voxelize(w, b, g).bins() > 0;
        }
        return frames;
      };
    } else {
      ReconstructionOptions opt;
      opt.method = parse_method(m);
      opt.window_size = a.window;
      opt.bins = a.bins;
      if (opt.method == Method::e2v) {
        if (a.weights.empty()) throw CLI::RequiredError("--weights is required to bench e2v");
        weights = nn::load_weights(a.weights);
        opt.bins = weights->config.bins;
        opt.weights = &*weights;
      }
      bm.name = m;
      if (opt.method == Method::highpass) {
        // event throughput without the post-filter; frame_ms times the filter alone
        opt.bilateral = false;
        auto frame = std::make_shared<Image>(stream.geometry.width, stream.geometry.height, 0.5);
        bm.frame_op = [frame] { (void)bilateral_filter(*frame); };
      }
      bm.process = [opt](const EventStream& s) { return reconstruct(s, opt).size(); };
    }
    reports.push_back(throughput_bench(bm, stream, a.reps));
  }
  const std::string table = bench_csv(reports);
  out << table;
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw DataError("cannot write " + a.csv);
    f << table;
  }
  return kExitOk;
}

// ---- latency ---------------------------------------------------------------

struct LatencyArgs {
  Common common;
  std::string events;
  std::string size = "240x180";
  std::size_t window = kDefaultWindowSize;
};

int run_latency(const LatencyArgs& a, std::ostream& out) {
  const EventStream stream = load_events(a.events, parse_size(a.size));
  const LatencySummary s = latency_report(stream, a.window);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "windows %zu (N=%zu)\nmin_ms %.3f\np25_ms %.3f\nmedian_ms %.3f\np75_ms %.3f\nmax_ms %.3f\n",
                s.windows, a.window, s.min_us / 1e3, s.p25_us / 1e3, s.median_us / 1e3, s.p75_us / 1e3,
                s.max_us / 1e3);
  out << buf;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event camera simulation, reconstruction and evaluation pipeline", "evpipe"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads (default 1, deterministic at any count)")
      ->envname("EVPIPE_THREADS")
      ->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic dataset");
  add_common(s, sim.common);
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--sequences", sim.sequences, "Number of sequences")->capture_default_str();
  s->add_option("--duration", sim.duration, "Sequence length in seconds")->capture_default_str();
  s->add_option("--size", sim.size, "Sensor size WxH")->capture_default_str();
  s->add_option("--seed", sim.seed, "Dataset seed")->capture_default_str();
  s->add_option("--render-rate", sim.render_rate, "Internal rendering rate (Hz)")->capture_default_str();
  s->add_option("--gt-rate", sim.gt_rate, "Ground-truth frame rate (Hz)")->capture_default_str();
  s->add_option("--threshold-mean", sim.threshold_mean, "Contrast threshold mean")->capture_default_str();
  s->add_option("--threshold-std", sim.threshold_std, "Contrast threshold std")->capture_default_str();
  s->add_option("--texture-size", sim.texture_size, "Procedural texture size (px)")->capture_default_str();
  s->add_option("--textures", sim.textures, "Directory of PGM textures (default: procedural)");
  s->add_option("--max-translation", sim.bounds.translation, "Translation speed bound (px/s)")->capture_default_str();
  s->add_option("--max-linear", sim.bounds.linear, "Rotation/scale/shear rate bound (1/s)")->capture_default_str();
  s->add_option("--max-perspective", sim.bounds.perspective, "Perspective rate bound (1/(px s))")->capture_default_str();

  VoxelizeArgs vox;
  auto* v = app.add_subcommand("voxelize", "Dump the event tensor of one window");
  add_common(v, vox.common);
  v->add_option("--events", vox.events, "Event file (binary or text)")->required();
  v->add_option("--size", vox.size, "Sensor size WxH for text input")->capture_default_str();
  v->add_option("--out", vox.out, "Tensor dump file")->required();
  v->add_option("--window", vox.window, "Events per window (N)")->capture_default_str()->check(CLI::PositiveNumber);
  v->add_option("--bins", vox.bins, "Temporal bins (B)")->capture_default_str()->check(CLI::PositiveNumber);
  v->add_option("--index", vox.index, "Window index")->capture_default_str();

  ReconstructArgs rec;
  auto* r = app.add_subcommand("reconstruct", "Reconstruct frames from events");
  add_common(r, rec.common);
  r->add_option("--method", rec.method, "integrate | highpass | e2v")
      ->capture_default_str()
      ->check(CLI::IsMember({"integrate", "highpass", "e2v"}));
  r->add_option("--events", rec.events, "Event file (binary or text)")->required();
  r->add_option("--size", rec.size, "Sensor size WxH for text input")->capture_default_str();
  r->add_option("--out", rec.out, "Output frame directory")->required();
  r->add_option("--weights", rec.weights, "Network weight file (e2v)");
  r->add_option("--frame-times", rec.frame_times, "Baselines: file of output timestamps (us)");
  r->add_option("--window", rec.window, "Events per window (N)")->capture_default_str()->check(CLI::PositiveNumber);
  r->add_option("--bins", rec.bins, "Temporal bins (B); e2v inherits from weights")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  r->add_option("--recurrent-frames", rec.recurrent_frames, "Recurrent frames (K); must match weights")
      ->check(CLI::NonNegativeNumber);
  r->add_option("--threshold", rec.threshold, "Assumed contrast threshold (baselines)")->capture_default_str();
  r->add_option("--alpha", rec.alpha, "High-pass leak rate (rad/s)")->capture_default_str();
  r->add_flag("--no-bilateral", rec.no_bilateral, "Skip the bilateral post-filter (highpass)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the recurrent network on a dataset");
  add_common(t, tr.common);
  t->add_option("--data", tr.data, "Dataset directory (from simulate)")->required();
  t->add_option("--out", tr.out, "Output weight file")->required();
  t->add_option("--loss-csv", tr.loss_csv, "Write per-epoch mean loss");
  t->add_option("--preset", tr.preset, "full | tiny")->capture_default_str()->check(CLI::IsMember({"full", "tiny"}));
  t->add_option("--base-channels", tr.base_channels, "Channels of the first encoder")->capture_default_str();
  t->add_option("--encoders", tr.encoders, "Encoder count")->capture_default_str();
  t->add_option("--residual-blocks", tr.residual_blocks, "Residual block count")->capture_default_str();
  t->add_option("--bins", tr.bins, "Temporal bins (B)")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--recurrent-frames", tr.recurrent_frames, "Recurrent frames (K)")->capture_default_str();
  t->add_option("--window", tr.train.window_size, "Events per window (N)")->capture_default_str();
  t->add_option("--unroll", tr.train.unroll, "Unroll length (L)")->capture_default_str();
  t->add_option("--lr", tr.train.learning_rate, "ADAM learning rate")->capture_default_str();
  t->add_option("--decay", tr.train.decay, "Rate decay factor")->capture_default_str();
  t->add_option("--decay-every", tr.train.decay_every, "Epochs between decays")->capture_default_str();
  t->add_option("--batch", tr.train.batch_size, "Batch size")->capture_default_str();
  t->add_option("--epochs", tr.train.epochs, "Epochs")->capture_default_str();
  t->add_option("--seed", tr.train.seed, "Initialisation and shuffling seed")->capture_default_str();
  t->add_option("--checkpoint", tr.checkpoint, "Checkpoint file (default <out>.ckpt)");
  t->add_option("--checkpoint-every", tr.train.checkpoint_every, "Epochs between checkpoints (0: off)")
      ->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score reconstructions against ground truth");
  add_common(e, ev.common);
  e->add_option("--recon", ev.recon, "Reconstruction directory, optionally label=dir; repeatable")->required();
  e->add_option("--gt", ev.gt, "Ground-truth sequence or dataset directory")->required();
  e->add_option("--warmup", ev.options.warmup, "Seconds skipped at the start")->capture_default_str();
  e->add_option("--tail", ev.options.tail, "Seconds skipped at the end")->capture_default_str();
  e->add_option("--tolerance", ev.options.tolerance, "Frame matching tolerance (us)")->capture_default_str();
  e->add_option("--csv", ev.csv, "Write the table as CSV");
  e->get_option("--recon")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Throughput of parsing and reconstruction");
  add_common(b, be.common);
  b->add_option("--events", be.events, "Event file (binary or text)")->required();
  b->add_option("--size", be.size, "Sensor size WxH for text input")->capture_default_str();
  b->add_option("--methods", be.methods, "Any of parse, integrate, highpass, e2v")
      ->capture_default_str()
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
      ->check(CLI::IsMember({"parse", "integrate", "highpass", "e2v"}));
  b->add_option("--weights", be.weights, "Network weight file (e2v)");
  b->add_option("--window", be.window, "Events per window (N)")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--bins", be.bins, "Temporal bins (B)")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--reps", be.reps, "Repetitions; the median is reported")->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--csv", be.csv, "Write the report as CSV");

  LatencyArgs la;
  auto* l = app.add_subcommand("latency", "Window duration quartiles");
  add_common(l, la.common);
  l->add_option("--events", la.events, "Event file (binary or text)")->required();
  l->add_option("--size", la.size, "Sensor size WxH for text input")->capture_default_str();
  l->add_option("--window", la.window, "Events per window (N)")->capture_default_str();

  std::vector<std::string> rev;
  try {
    rev = expand_config(args);
  } catch (const DataError& ex) {
    err << "evpipe: " << ex.what() << '\n';
    return kExitUsage;
  }
  rev.erase(rev.begin());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    err << "evpipe: " << ex.what() << "\n\n";
    const CLI::App* active = &app;
    for (auto* sub : app.get_subcommands()) active = sub;
    err << active->help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const bool dump = (sub == s && sim.common.dump_config) || (sub == v && vox.common.dump_config) ||
                    (sub == r && rec.common.dump_config) || (sub == t && tr.common.dump_config) ||
                    (sub == e && ev.common.dump_config) || (sub == b && be.common.dump_config) ||
                    (sub == l && la.common.dump_config);
  if (dump) {
    std::istringstream dumped(sub->config_to_str(true, false));
    std::string line;
    while (std::getline(dumped, line)) {
      if (line.rfind("dump-config=", 0) == 0 || line.rfind("config=", 0) == 0) continue;
      out << line << '\n';
    }
    return kExitOk;
  }

  try {
    set_num_threads(threads);
    if (sub == s) return run_simulate(sim, out);
    if (sub == v) return run_voxelize(vox, out);
    if (sub == r) return run_reconstruct(rec, *r, out);
    if (sub == t) return run_train(tr, *t, out);
    if (sub == e) return run_eval(ev, out);
    if (sub == b) return run_bench(be, out);
    return run_latency(la, out);
  } catch (const CLI::Error& ex) {
    err << "evpipe " << sub->get_name() << ": " << ex.what() << '\n';
    return kExitUsage;
  } catch (const NumericError& ex) {
    err << "evpipe " << sub->get_name() << ": numeric failure: " << ex.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& ex) {
    err << "evpipe " << sub->get_name() << ": config error: " << ex.what() << '\n';
    return kExitData;
  } catch (const DataError& ex) {
    err << "evpipe " << sub->get_name() << ": data error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& ex) {
    err << "evpipe " << sub->get_name() << ": " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    // I/O and filesystem failures
    err << "evpipe " << sub->get_name() << ": data error: " << ex.what() << '\n';
    return kExitData;
  }
}

}  // namespace evrecon
