#include "evrecon/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <stdexcept>

#include "evrecon/errors.hpp"
#include "evrecon/image.hpp"
#include "evrecon/nn/adam.hpp"
#include "evrecon/nn/loss.hpp"
#include "evrecon/nn/weights_io.hpp"

namespace evrecon::nn {

void TrainConfig::validate() const {
  if (unroll < 1) throw std::invalid_argument("unroll length must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (decay_every < 1) throw std::invalid_argument("decay_every must be >= 1");
  if (window_size < 1) throw std::invalid_argument("window size must be >= 1");
}

// ---- data ------------------------------------------------------------------

namespace {

const Frame& nearest_frame(const std::vector<Frame>& frames, Timestamp t) {
  auto it = std::lower_bound(frames.begin(), frames.end(), t,
                             [](const Frame& f, Timestamp v) { return f.t < v; });
  if (it == frames.end()) return frames.back();
  if (it == frames.begin()) return *it;
  const auto prev = std::prev(it);
  return (t - prev->t) <= (it->t - t) ? *prev : *it;
}

}  // namespace

TrainingSet build_training_set(const DatasetManifest& manifest, std::size_t window_size, int bins,
                               int unroll) {
  if (manifest.sequences.empty()) throw DataError("dataset has no sequences");
  TrainingSet set;
  set.geometry = manifest.geometry;
  set.bins = bins;
  set.unroll = unroll;
  for (std::size_t s = 0; s < manifest.sequences.size(); ++s) {
    const auto dir = manifest.sequence_dir(s);
    const EventStream stream = load_events(dir / "events.bin");
    if (stream.geometry != manifest.geometry) {
      throw DataError(dir.string() + ": geometry differs from manifest");
    }
    const auto frames = read_frame_sequence(dir);
    if (frames.empty()) throw DataError(dir.string() + ": no ground-truth frames");
    const auto windows = window_by_count(stream, window_size);
    if (windows.size() < static_cast<std::size_t>(unroll)) {
      throw DataError(dir.string() + ": only " + std::to_string(windows.size()) +
                      " windows of " + std::to_string(window_size) + " events, need " +
                      std::to_string(unroll));
    }
    for (std::size_t start = 0; start + unroll <= windows.size(); start += unroll) {
      TrainingSample sample;
      for (int l = 0; l < unroll; ++l) {
        const auto& w = windows[start + l];
        const EventTensor t = voxelize(w, bins, stream.geometry);
        sample.tensors.emplace_back(t.grid.values().begin(), t.grid.values().end());
        const Image& gt = nearest_frame(frames, w.t_last()).image;
        sample.targets.emplace_back(gt.values().begin(), gt.values().end());
      }
      set.samples.push_back(std::move(sample));
    }
  }
  return set;
}

UnrolledBatch make_batch(const TrainingSet& set, std::span<const std::size_t> indices) {
  const int n = static_cast<int>(indices.size());
  const int h = set.geometry.height, w = set.geometry.width;
  UnrolledBatch batch;
  for (int l = 0; l < set.unroll; ++l) {
    Tensor4 ev(n, set.bins, h, w);
    Tensor4 tg(n, 1, h, w);
    for (int i = 0; i < n; ++i) {
      const auto& sample = set.samples[indices[i]];
      std::copy(sample.tensors[l].begin(), sample.tensors[l].end(), ev.sample(i).begin());
      std::copy(sample.targets[l].begin(), sample.targets[l].end(), tg.sample(i).begin());
    }
    batch.events.push_back(std::move(ev));
    batch.targets.push_back(std::move(tg));
  }
  return batch;
}

// ---- unrolled loss ---------------------------------------------------------

namespace {

void accumulate(NetworkWeights& dst, const NetworkWeights& src) {
  auto d = trainable_parameters(dst);
  const auto s = trainable_parameters(src);
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (std::size_t i = 0; i < d[k].size(); ++i) d[k][i] += s[k][i];
  }
}

}  // namespace

double unrolled_loss(NetworkWeights& weights, const UnrolledBatch& batch, NetworkWeights* grads) {
  const NetConfig& cfg = weights.config;
  const int steps = static_cast<int>(batch.events.size());
  if (steps < 1 || batch.targets.size() != batch.events.size()) {
    throw ShapeError("unrolled batch needs matching, non-empty event and target sequences");
  }
  const int n = batch.events[0].n(), h = batch.events[0].h(), w = batch.events[0].w();
  const int b = cfg.bins, k = cfg.recurrent_frames;

  // previous[j] holds the j-th oldest recycled frame and the step that produced it (-1: reset).
  std::vector<Tensor4> previous(k, Tensor4(n, 1, h, w, 0.5));
  std::vector<int> previous_src(k, -1);
  std::vector<UNetCache> caches(grads ? steps : 0);
  std::vector<std::vector<int>> sources(steps);
  std::vector<Tensor4> pred_grads;
  double total = 0.0;

  for (int l = 0; l < steps; ++l) {
    require_shape(batch.events[l], Shape4{n, b, h, w}, "unrolled event tensor");
    Tensor4 input(n, b + k, h, w);
    for (int i = 0; i < n; ++i) {
      auto dst = input.sample(i);
      const auto ev = batch.events[l].sample(i);
      std::copy(ev.begin(), ev.end(), dst.begin());
      for (int j = 0; j < k; ++j) {
        const auto fr = previous[j].sample(i);
        std::copy(fr.begin(), fr.end(), dst.begin() + static_cast<std::ptrdiff_t>((b + j) * input.shape().plane()));
      }
    }
    sources[l] = previous_src;
    Tensor4 pred = unet_forward(input, weights, Mode::train, grads ? &caches[l] : nullptr);
    LossResult lr = loss_recon(pred, batch.targets[l]);
    total += lr.value;
    if (grads) pred_grads.push_back(std::move(lr.grad));
    if (k > 0) {
      std::rotate(previous.begin(), previous.begin() + 1, previous.end());
      std::rotate(previous_src.begin(), previous_src.begin() + 1, previous_src.end());
      previous.back() = std::move(pred);
      previous_src.back() = l;
    }
  }

  if (grads) {
    *grads = zero_weights(cfg);
    for (int l = steps - 1; l >= 0; --l) {
      const UNetGrads g = unet_backward(caches[l], weights, pred_grads[l]);
      accumulate(*grads, g.params);
      for (int j = 0; j < k; ++j) {
        const int src = sources[l][j];
        if (src < 0) continue;
        for (int i = 0; i < n; ++i) {
          const auto gin = g.input.channel(i, b + j);
          auto dst = pred_grads[src].sample(i);
          for (std::size_t p = 0; p < dst.size(); ++p) dst[p] += gin[p];
        }
      }
    }
  }
  return total;
}

// ---- training loop ---------------------------------------------------------

TrainResult train(const TrainingSet& set, const NetConfig& net, const TrainConfig& config,
                  const TrainProgress& progress) {
  config.validate();
  net.validate();
  if (set.samples.empty()) throw DataError("training set is empty");
  if (set.bins != net.bins) throw ConfigError("training set and network disagree on B");
  if (set.unroll != config.unroll) throw ConfigError("training set and config disagree on L");

  TrainResult result{init_weights(net, config.seed), {}};
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66Dull);
  AdamState adam;
  std::vector<std::size_t> order(set.samples.size());
  std::iota(order.begin(), order.end(), 0);

  auto checkpoint = [&](const NetworkWeights& w) {
    if (!config.checkpoint_path.empty()) save_weights(w, config.checkpoint_path);
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double rate = scheduled_rate(config.learning_rate, epoch, config.decay, config.decay_every);
    double sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const UnrolledBatch batch =
          make_batch(set, std::span<const std::size_t>(order.data() + start, end - start));
      NetworkWeights grads;
      const double loss = unrolled_loss(result.weights, batch, &grads);
      if (!std::isfinite(loss)) {
        checkpoint(result.weights);
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) +
                           " (non-finite loss)");
      }
      const auto params = trainable_parameters(result.weights);
      const auto g = trainable_parameters(std::as_const(grads));
      adam_step(params, g, adam, rate);
      sum += loss;
      ++batches;
    }
    const double mean = sum / batches;
    result.epoch_loss.push_back(mean);
    if (progress) progress(epoch, mean);
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
      checkpoint(result.weights);
    }
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest, const NetConfig& net, const TrainConfig& config,
                  const TrainProgress& progress) {
  config.validate();
  const TrainingSet set = build_training_set(manifest, config.window_size, net.bins, config.unroll);
  return train(set, net, config, progress);
}

}  // namespace evrecon::nn
