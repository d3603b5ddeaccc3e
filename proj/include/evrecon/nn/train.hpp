#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "evrecon/event_core.hpp"
#include "evrecon/nn/unet.hpp"
#include "evrecon/simulator.hpp"
#include "evrecon/tensorizer.hpp"

namespace evrecon::nn {

struct TrainConfig {
  int unroll = 8;                 // L
  double learning_rate = 1e-4;
  double decay = 0.9;             // applied every decay_every epochs
  int decay_every = 10;
  int batch_size = 16;
  int epochs = 40;
  std::uint64_t seed = 0;
  std::size_t window_size = kDefaultWindowSize;  // N
  std::filesystem::path checkpoint_path;          // empty: no checkpoints
  int checkpoint_every = 0;                       // epochs; 0 disables periodic saves

  void validate() const;
};

/// L consecutive windows of one sequence and the ground truth at each window end.
/// Stored single precision to keep whole datasets in memory.
struct TrainingSample {
  std::vector<std::vector<float>> tensors;  // L x (B*H*W)
  std::vector<std::vector<float>> targets;  // L x (H*W)
};

struct TrainingSet {
  SensorGeometry geometry;
  int bins = 0;
  int unroll = 0;
  std::vector<TrainingSample> samples;
};

/// Cuts every sequence into non-overlapping runs of `unroll` windows; the target
/// of each window is the ground-truth frame nearest its last event. Throws
/// DataError if a sequence yields fewer than `unroll` windows.
TrainingSet build_training_set(const DatasetManifest& manifest, std::size_t window_size, int bins,
                               int unroll);

/// One batch of an unrolled sequence: per step, event tensors (N, B, H, W) and
/// targets (N, 1, H, W).
struct UnrolledBatch {
  std::vector<Tensor4> events;
  std::vector<Tensor4> targets;
};

UnrolledBatch make_batch(const TrainingSet& set, std::span<const std::size_t> indices);

/// Runs L recurrent steps from the reset state (K frames of 0.5), feeding each
/// prediction back as input, and returns the loss summed over steps. When
/// `grads` is given it receives the full backpropagation-through-time gradient,
/// including the paths through recycled frames.
double unrolled_loss(NetworkWeights& weights, const UnrolledBatch& batch, NetworkWeights* grads);

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

using TrainProgress = std::function<void(int epoch, double mean_loss)>;

/// ADAM over shuffled batches; bitwise deterministic for a fixed seed. A
/// non-finite loss writes a checkpoint (if configured) and throws NumericError.
TrainResult train(const TrainingSet& set, const NetConfig& net, const TrainConfig& config,
                  const TrainProgress& progress = {});
TrainResult train(const DatasetManifest& manifest, const NetConfig& net, const TrainConfig& config,
                  const TrainProgress& progress = {});

}  // namespace evrecon::nn
