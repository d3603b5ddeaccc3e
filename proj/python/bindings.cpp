#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

#include "evrecon/cli.hpp"
#include "evrecon/errors.hpp"
#include "evrecon/evalmetrics.hpp"
#include "evrecon/event_core.hpp"
#include "evrecon/nn/weights_io.hpp"
#include "evrecon/reconstructors.hpp"
#include "evrecon/simulator.hpp"
#include "evrecon/tensorizer.hpp"

namespace py = pybind11;
using namespace evrecon;

namespace {

using EventArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;
using ImageArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// events as an (N, 4) int64 array of t, x, y, p
EventArray to_array(const EventStream& s) {
  EventArray out({static_cast<py::ssize_t>(s.size()), py::ssize_t{4}});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Event& e = s.events[i];
    v(i, 0) = e.t;
    v(i, 1) = e.x;
    v(i, 2) = e.y;
    v(i, 3) = e.p;
  }
  return out;
}

EventStream from_array(const EventArray& a, int width, int height) {
  if (a.ndim() != 2 || a.shape(1) != 4) throw ShapeError("events must be an (N, 4) array of t, x, y, p");
  EventStream s;
  s.geometry = SensorGeometry(width, height);
  auto v = a.unchecked<2>();
  s.events.resize(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    if (v(i, 1) < 0 || v(i, 2) < 0 || v(i, 1) >= width || v(i, 2) >= height) {
      throw DataError("event " + std::to_string(i) + " lies outside the sensor");
    }
    if (v(i, 3) != 1 && v(i, 3) != -1) throw DataError("event " + std::to_string(i) + ": polarity must be +1 or -1");
    s.events[i] = Event{static_cast<std::uint16_t>(v(i, 1)), static_cast<std::uint16_t>(v(i, 2)), v(i, 0),
                        static_cast<std::int8_t>(v(i, 3))};
  }
  return s;
}

ImageArray to_array(const Image& img) {
  ImageArray out({img.height(), img.width()});
  std::copy(img.values().begin(), img.values().end(), out.mutable_data());
  return out;
}

Image from_array(const ImageArray& a) {
  if (a.ndim() != 2) throw ShapeError("image must be a 2-D array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), img.values().begin());
  return img;
}

ImageArray stack_to_array(const ChannelStack& s) {
  const auto& g = s.geometry();
  ImageArray out({s.channels(), g.height, g.width});
  std::copy(s.values().begin(), s.values().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_evrecon, m) {
  m.doc() = "Event camera simulation, reconstruction and evaluation";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("load_events", [](const std::filesystem::path& path, int width, int height) {
        return to_array(load_events(path, SensorGeometry(width, height)));
      }, py::arg("path"), py::arg("width") = 240, py::arg("height") = 180,
      "Reads a text or binary event file into an (N, 4) int64 array of t, x, y, p.");

  m.def("parse_events", [](const std::string& text, int width, int height) {
        return to_array(parse_event_text(std::string_view(text), SensorGeometry(width, height)));
      }, py::arg("text"), py::arg("width") = 240, py::arg("height") = 180);

  m.def("save_events", [](const std::filesystem::path& path, const EventArray& events, int width, int height) {
        save_events(path, from_array(events, width, height));
      }, py::arg("path"), py::arg("events"), py::arg("width"), py::arg("height"));

  m.def("voxelize", [](const EventArray& events, int bins, int width, int height) {
        const EventStream s = from_array(events, width, height);
        if (s.empty()) throw DataError("cannot voxelize an empty window");
        return stack_to_array(voxelize(EventWindow(s.events), bins, s.geometry).grid);
      }, py::arg("events"), py::arg("bins"), py::arg("width"), py::arg("height"),
      "Voxel grid (B, H, W) of one window of events.");

  m.def("generate_dataset", [](const std::filesystem::path& out, std::size_t sequences, double duration,
                               int width, int height, std::uint64_t seed) {
        SimConfig cfg;
        cfg.geometry = SensorGeometry(width, height);
        cfg.duration = duration;
        cfg.seed = seed;
        const DatasetManifest mf = generate_dataset(cfg, TextureSource::procedural(), sequences, out);
        std::vector<std::string> names;
        for (const auto& s : mf.sequences) names.push_back(s.name);
        return names;
      }, py::arg("out"), py::arg("sequences"), py::arg("duration") = 2.0, py::arg("width") = 64,
      py::arg("height") = 64, py::arg("seed") = 0);

  m.def("reconstruct", [](const EventArray& events, int width, int height, const std::string& method,
                          std::size_t window_size, int bins, double threshold,
                          const std::optional<std::filesystem::path>& weights,
                          const std::optional<std::vector<Timestamp>>& frame_times, bool bilateral) {
        const EventStream s = from_array(events, width, height);
        ReconstructionOptions opt;
        opt.method = parse_method(method);
        opt.window_size = window_size;
        opt.bins = bins;
        opt.threshold = threshold;
        opt.bilateral = bilateral;
        opt.frame_times = frame_times;
        std::optional<nn::NetworkWeights> w;
        if (weights) {
          w = nn::load_weights(*weights);
          opt.weights = &*w;
          opt.bins = w->config.bins;
        }
        std::vector<Frame> frames;
        {
          py::gil_scoped_release release;
          frames = reconstruct(s, opt);
        }
        ImageArray images({static_cast<py::ssize_t>(frames.size()), py::ssize_t{height}, py::ssize_t{width}});
        py::array_t<std::int64_t> times(static_cast<py::ssize_t>(frames.size()));
        for (std::size_t i = 0; i < frames.size(); ++i) {
          std::copy(frames[i].image.values().begin(), frames[i].image.values().end(),
                    images.mutable_data() + i * frames[i].image.size());
          times.mutable_data()[i] = frames[i].t;
        }
        return py::make_tuple(images, times);
      }, py::arg("events"), py::arg("width"), py::arg("height"), py::arg("method") = "integrate",
      py::arg("window_size") = kDefaultWindowSize, py::arg("bins") = kDefaultBins,
      py::arg("threshold") = kNominalThreshold, py::arg("weights") = py::none(),
      py::arg("frame_times") = py::none(), py::arg("bilateral") = true,
      "Returns (frames (F, H, W), timestamps (F,)).");

  m.def("ssim", [](const ImageArray& a, const ImageArray& b) { return ssim(from_array(a), from_array(b)); });
  m.def("mse", [](const ImageArray& a, const ImageArray& b) { return mse(from_array(a), from_array(b)); });
  m.def("hist_equalize", [](const ImageArray& a) { return to_array(hist_equalize(from_array(a))); });

  m.def("latency", [](const EventArray& events, int width, int height, std::size_t n) {
        const LatencySummary r = latency_report(from_array(events, width, height), n);
        py::dict d;
        d["windows"] = r.windows;
        d["min_us"] = r.min_us;
        d["p25_us"] = r.p25_us;
        d["median_us"] = r.median_us;
        d["p75_us"] = r.p75_us;
        d["max_us"] = r.max_us;
        return d;
      }, py::arg("events"), py::arg("width"), py::arg("height"), py::arg("n") = kDefaultWindowSize);

  m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "evpipe");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      }, py::arg("args"), "Runs an evpipe subcommand in-process; returns (exit code, stdout, stderr).");
}
