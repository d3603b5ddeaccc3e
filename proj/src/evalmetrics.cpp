#include "evrecon/evalmetrics.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "evrecon/errors.hpp"
#include "evrecon/ssim.hpp"

namespace evrecon {

// ---- per-frame metrics -----------------------------------------------------

Image hist_equalize(const Image& image) {
  constexpr int kBins = 256;
  const auto in = image.values();
  Image out(image.width(), image.height());
  if (in.empty()) return out;
  auto bin_of = [](double v) { return std::clamp(static_cast<int>(std::clamp(v, 0.0, 1.0) * kBins), 0, kBins - 1); };
  std::array<std::size_t, kBins> hist{};
  for (double v : in) ++hist[bin_of(v)];
  std::array<double, kBins> cdf{};
  std::size_t running = 0;
  for (int b = 0; b < kBins; ++b) {
    running += hist[b];
    cdf[b] = static_cast<double>(running) / static_cast<double>(in.size());
  }
  auto dst = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) dst[i] = cdf[bin_of(in[i])];
  return out;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("mse: frame shapes differ");
  if (a.empty()) throw ShapeError("mse: empty frames");
  double s = 0.0;
  const auto va = a.values(), vb = b.values();
  for (std::size_t i = 0; i < va.size(); ++i) s += (va[i] - vb[i]) * (va[i] - vb[i]);
  return s / static_cast<double>(va.size());
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("ssim: frame shapes differ");
  return ssim_index(a.values(), b.values(), a.width(), a.height());
}

// ---- matching --------------------------------------------------------------

MatchResult match_frames(std::span<const Timestamp> recon, std::span<const Timestamp> gt,
                         Timestamp tolerance) {
  MatchResult result;
  std::vector<bool> used(recon.size(), false);
  for (std::size_t g = 0; g < gt.size(); ++g) {
    const Timestamp t = gt[g];
    const auto it = std::lower_bound(recon.begin(), recon.end(), t);
    std::size_t best = recon.size();
    Timestamp best_gap = std::numeric_limits<Timestamp>::max();
    if (it != recon.begin()) {
      // earliest among equal timestamps on the left
      auto left = std::prev(it);
      left = std::lower_bound(recon.begin(), std::next(left), *left);
      best = static_cast<std::size_t>(left - recon.begin());
      best_gap = t - *left;
    }
    if (it != recon.end() && *it - t < best_gap) {
      best = static_cast<std::size_t>(it - recon.begin());
      best_gap = *it - t;
    }
    if (best < recon.size() && best_gap <= tolerance) {
      result.pairs.push_back(FramePair{best, g, recon[best] - t});
      used[best] = true;
    } else {
      result.unmatched_gt.push_back(g);
    }
  }
  for (std::size_t r = 0; r < recon.size(); ++r) {
    if (!used[r]) result.unmatched_recon.push_back(r);
  }
  return result;
}

// ---- sequence --------------------------------------------------------------

SequenceMetrics evaluate_sequence(const std::string& sequence, std::span<const Frame> recon,
                                  std::span<const Frame> gt, const EvalOptions& options) {
  SequenceMetrics m;
  m.sequence = sequence;
  std::vector<Timestamp> recon_t;
  recon_t.reserve(recon.size());
  for (const auto& f : recon) recon_t.push_back(f.t);
  if (!std::is_sorted(recon_t.begin(), recon_t.end())) {
    throw DataError(sequence + ": reconstruction timestamps not sorted");
  }

  std::vector<std::size_t> candidates;
  std::vector<Timestamp> cand_t;
  if (!gt.empty()) {
    const Timestamp start = gt.front().t + static_cast<Timestamp>(std::llround(options.warmup * 1e6));
    const Timestamp end = gt.back().t - static_cast<Timestamp>(std::llround(options.tail * 1e6));
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool keep = gt[i].t >= start && (options.tail <= 0.0 || gt[i].t <= end);
      if (keep) {
        candidates.push_back(i);
        cand_t.push_back(gt[i].t);
      } else {
        ++m.excluded;
      }
    }
  }
  if (!std::is_sorted(cand_t.begin(), cand_t.end())) {
    throw DataError(sequence + ": ground-truth timestamps not sorted");
  }
  const MatchResult match = match_frames(recon_t, cand_t, options.tolerance);
  m.unmatched = match.unmatched_gt.size();
  m.matched = match.pairs.size();
  if (match.pairs.empty()) {
    m.empty = true;
    m.mse = m.ssim = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  double sum_mse = 0.0, sum_ssim = 0.0;
  for (const auto& p : match.pairs) {
    const Image r = hist_equalize(recon[p.recon].image);
    const Image g = hist_equalize(gt[candidates[p.gt]].image);
    sum_mse += mse(r, g);
    sum_ssim += ssim(r, g);
  }
  m.mse = sum_mse / static_cast<double>(m.matched);
  m.ssim = sum_ssim / static_cast<double>(m.matched);
  return m;
}

// ---- tables ----------------------------------------------------------------

MetricsTable aggregate_table(std::vector<MethodResults> results) {
  MetricsTable table;
  if (results.empty()) return table;
  for (const auto& s : results.front().sequences) table.sequences.push_back(s.sequence);
  for (const auto& r : results) {
    if (r.sequences.size() != table.sequences.size()) {
      throw DataError("method " + r.method + " was evaluated on a different sequence set");
    }
    for (std::size_t i = 0; i < r.sequences.size(); ++i) {
      if (r.sequences[i].sequence != table.sequences[i]) {
        throw DataError("method " + r.method + " was evaluated on a different sequence set");
      }
    }
    double sm = 0.0, ss = 0.0;
    std::size_t n = 0;
    for (const auto& s : r.sequences) {
      if (s.empty) continue;
      sm += s.mse;
      ss += s.ssim;
      ++n;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    table.mean_mse.push_back(n ? sm / n : nan);
    table.mean_ssim.push_back(n ? ss / n : nan);
  }
  table.methods = std::move(results);
  return table;
}

namespace {

std::string fmt(double v, int precision) {
  if (std::isnan(v)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Index of the best value (lowest or highest), or npos when all are NaN.
std::size_t best_of(const std::vector<double>& v, bool lower_is_better) {
  std::size_t best = std::string::npos;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) continue;
    if (best == std::string::npos || (lower_is_better ? v[i] < v[best] : v[i] > v[best])) best = i;
  }
  return best;
}

}  // namespace

std::string MetricsTable::to_text() const {
  constexpr int kPrec = 3;
  std::size_t name_w = 8;
  for (const auto& s : sequences) name_w = std::max(name_w, s.size());
  std::size_t col_w = 8;
  for (const auto& m : methods) col_w = std::max(col_w, m.method.size() + 1);

  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.insert(0, w - s.size(), ' ');
    return s;
  };
  auto row = [&](const std::string& name, const std::vector<double>& mse_v,
                 const std::vector<double>& ssim_v) {
    std::string line = name + std::string(name_w - name.size(), ' ');
    const auto bm = best_of(mse_v, true), bs = best_of(ssim_v, false);
    line += " |";
    for (std::size_t i = 0; i < mse_v.size(); ++i) {
      line += pad(fmt(mse_v[i], kPrec) + (i == bm && methods.size() > 1 ? "*" : " "), col_w + 1);
    }
    line += " |";
    for (std::size_t i = 0; i < ssim_v.size(); ++i) {
      line += pad(fmt(ssim_v[i], kPrec) + (i == bs && methods.size() > 1 ? "*" : " "), col_w + 1);
    }
    out << line << '\n';
  };

  std::string header = std::string(name_w, ' ') + " |";
  std::string sub = "sequence" + std::string(name_w - 8, ' ') + " |";
  for (std::size_t i = 0; i < methods.size(); ++i) sub += pad(methods[i].method + " ", col_w + 1);
  sub += " |";
  for (std::size_t i = 0; i < methods.size(); ++i) sub += pad(methods[i].method + " ", col_w + 1);
  const std::size_t block = methods.size() * (col_w + 1);
  header += pad("MSE ", block) + " |" + pad("SSIM ", block);
  out << header << '\n' << sub << '\n' << std::string(sub.size(), '-') << '\n';
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    std::vector<double> mv, sv;
    for (const auto& m : methods) {
      mv.push_back(m.sequences[s].empty ? std::nan("") : m.sequences[s].mse);
      sv.push_back(m.sequences[s].empty ? std::nan("") : m.sequences[s].ssim);
    }
    row(sequences[s], mv, sv);
  }
  out << std::string(sub.size(), '-') << '\n';
  row("Mean", mean_mse, mean_ssim);
  return out.str();
}

std::string MetricsTable::to_csv() const {
  constexpr int kPrec = 6;
  std::ostringstream out;
  out << "sequence,method,mse,ssim,frames\n";
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    for (const auto& m : methods) {
      const auto& r = m.sequences[s];
      out << sequences[s] << ',' << m.method << ',' << (r.empty ? "nan" : fmt(r.mse, kPrec)) << ','
          << (r.empty ? "nan" : fmt(r.ssim, kPrec)) << ',' << r.matched << '\n';
    }
  }
  for (std::size_t i = 0; i < methods.size(); ++i) {
    std::size_t frames = 0;
    for (const auto& r : methods[i].sequences) frames += r.matched;
    out << "Mean," << methods[i].method << ','
        << (std::isnan(mean_mse[i]) ? "nan" : fmt(mean_mse[i], kPrec)) << ','
        << (std::isnan(mean_ssim[i]) ? "nan" : fmt(mean_ssim[i], kPrec)) << ',' << frames << '\n';
  }
  return out.str();
}

// ---- performance -----------------------------------------------------------

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

}  // namespace

BenchReport throughput_bench(const BenchMethod& method, const EventStream& stream, int repetitions) {
  if (stream.empty()) throw DataError("throughput_bench: empty stream");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  using clock = std::chrono::steady_clock;
  std::vector<double> seconds;
  std::size_t frames = 0;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = clock::now();
    frames = method.process(stream);
    seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
  }
  const double total = std::max(median_of(seconds), 1e-9);
  BenchReport report;
  report.method = method.name;
  report.mev_per_s = static_cast<double>(stream.size()) / (1e6 * total);
  if (method.frame_op) {
    std::vector<double> op;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = clock::now();
      method.frame_op();
      op.push_back(std::chrono::duration<double>(clock::now() - t0).count());
    }
    report.frame_ms = median_of(op) * 1e3;
  } else {
    report.frame_ms = frames > 0 ? total * 1e3 / static_cast<double>(frames) : 0.0;
  }
  return report;
}

std::string bench_csv(std::span<const BenchReport> reports) {
  std::ostringstream out;
  out << "method,mev_per_s,frame_ms\n";
  for (const auto& r : reports) out << r.method << ',' << fmt(r.mev_per_s, 4) << ',' << fmt(r.frame_ms, 4) << '\n';
  return out.str();
}

// ---- latency ---------------------------------------------------------------

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sequence");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

LatencySummary latency_report(const EventStream& stream, std::size_t n) {
  if (n < 2) throw std::invalid_argument("latency window size must be >= 2");
  const auto windows = window_by_count(stream, n);
  if (windows.empty()) {
    throw DataError("stream has " + std::to_string(stream.size()) + " events, fewer than one window of " +
                    std::to_string(n));
  }
  std::vector<double> us;
  us.reserve(windows.size());
  for (const auto& w : windows) us.push_back(static_cast<double>(w.duration_us()));
  std::sort(us.begin(), us.end());
  LatencySummary s;
  s.windows = us.size();
  s.min_us = us.front();
  s.p25_us = quantile_sorted(us, 0.25);
  s.median_us = quantile_sorted(us, 0.5);
  s.p75_us = quantile_sorted(us, 0.75);
  s.max_us = us.back();
  return s;
}

}  // namespace evrecon
