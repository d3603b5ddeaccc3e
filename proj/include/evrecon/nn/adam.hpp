#pragma once

#include <span>
#include <vector>

namespace evrecon::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  long long step = 0;
};

/// One bias-corrected ADAM update of every parameter array in place.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double rate,
               const AdamConfig& config = {});

/// base * decay^floor(epoch / every), epoch counted from 0.
double scheduled_rate(double base, int epoch, double decay = 0.9, int every = 10);

}  // namespace evrecon::nn
