#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evrecon/event_core.hpp"
#include "evrecon/image.hpp"

namespace evrecon {

// ---- per-frame metrics -----------------------------------------------------

/// 256-bin CDF mapping on [0,1]; value v goes to CDF(bin(v)). A constant image
/// maps to all ones.
Image hist_equalize(const Image& image);

double mse(const Image& a, const Image& b);
/// Mean SSIM, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, range 1.
double ssim(const Image& a, const Image& b);

// ---- frame matching --------------------------------------------------------

inline constexpr Timestamp kMatchTolerance = 1000;  // us

struct FramePair {
  std::size_t recon = 0;  // index into the reconstruction list
  std::size_t gt = 0;     // index into the ground-truth list
  Timestamp gap = 0;      // recon.t - gt.t
};

struct MatchResult {
  std::vector<FramePair> pairs;
  std::vector<std::size_t> unmatched_gt;
  std::vector<std::size_t> unmatched_recon;  // never chosen by any GT frame
};

/// Pairs each GT time with the nearest reconstruction within `tolerance`; ties go
/// to the earlier reconstruction. A reconstruction may serve several GT frames.
MatchResult match_frames(std::span<const Timestamp> recon, std::span<const Timestamp> gt,
                         Timestamp tolerance = kMatchTolerance);

// ---- sequence evaluation ---------------------------------------------------

struct EvalOptions {
  double warmup = 2.0;  // s dropped after the first GT frame
  double tail = 0.0;    // s dropped before the last GT frame
  Timestamp tolerance = kMatchTolerance;
};

struct SequenceMetrics {
  std::string sequence;
  double mse = 0.0;
  double ssim = 0.0;
  std::size_t matched = 0;
  std::size_t excluded = 0;   // GT frames inside the warm-up / tail spans
  std::size_t unmatched = 0;  // candidate GT frames without a reconstruction
  bool empty = false;         // no matched pairs; mse/ssim are NaN
};

/// Histogram-equalizes both members of every matched pair and averages MSE/SSIM.
SequenceMetrics evaluate_sequence(const std::string& sequence, std::span<const Frame> recon,
                                  std::span<const Frame> gt, const EvalOptions& options = {});

// ---- tables ----------------------------------------------------------------

struct MethodResults {
  std::string method;
  std::vector<SequenceMetrics> sequences;
};

struct MetricsTable {
  std::vector<std::string> sequences;
  std::vector<MethodResults> methods;
  std::vector<double> mean_mse;   // per method, over non-empty rows
  std::vector<double> mean_ssim;

  /// Aligned text with a final Mean row; '*' marks the best method per row.
  std::string to_text() const;
  /// `sequence,method,mse,ssim,frames`, Mean rows last.
  std::string to_csv() const;
};

/// Throws DataError if the methods were not run on the same sequence list.
MetricsTable aggregate_table(std::vector<MethodResults> results);

// ---- performance -----------------------------------------------------------

struct BenchReport {
  std::string method;
  double mev_per_s = 0.0;
  double frame_ms = 0.0;
};

struct BenchMethod {
  std::string name;
  /// Processes the whole stream; returns the number of frames synthesized.
  std::function<std::size_t(const EventStream&)> process;
  /// When set, frame synthesis time is the median duration of this call alone
  /// (e.g. one post-filter application) instead of process time per frame.
  std::function<void()> frame_op;
};

/// Median wall-clock over `repetitions` runs; Mev/s = events / (1e6 * seconds).
BenchReport throughput_bench(const BenchMethod& method, const EventStream& stream, int repetitions);

std::string bench_csv(std::span<const BenchReport> reports);

// ---- latency ---------------------------------------------------------------

struct LatencySummary {
  std::size_t windows = 0;
  double min_us = 0, p25_us = 0, median_us = 0, p75_us = 0, max_us = 0;
};

/// Linear-interpolated quantile of sorted values (q in [0,1]).
double quantile_sorted(std::span<const double> sorted, double q);

/// Quartiles of the window durations for windows of n events. Throws DataError
/// when the stream holds less than one full window.
LatencySummary latency_report(const EventStream& stream, std::size_t n);

}  // namespace evrecon
