#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "evrecon/errors.hpp"
#include "evrecon/evalmetrics.hpp"
#include "evrecon/ssim.hpp"
#include "metric_oracles.hpp"

using namespace evrecon;
using evrecon::checks::random_image;
using evrecon::checks::ssim_oracle;

namespace {

std::vector<Frame> frames_at(const std::vector<Timestamp>& ts, const Image& img) {
  std::vector<Frame> out;
  for (auto t : ts) out.push_back(Frame{img, t});
  return out;
}

}  // namespace

TEST_CASE("ssim and mse match brute-force oracles") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Image a = random_image(32, 32, 2 * s), b = random_image(32, 32, 2 * s + 1);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) < 1e-6);
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
    CHECK(std::abs(mse(a, b) - m / a.size()) < 1e-12);
  }
  const Image a = random_image(32, 32, 100);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mse(a, a) == 0.0);
  CHECK_THROWS_AS(ssim(Image(10, 32), Image(10, 32)), ShapeError);
  CHECK_THROWS_AS(mse(Image(4, 4), Image(4, 5)), ShapeError);
}

TEST_CASE("ssim gradient matches finite differences") {
  Image a = random_image(16, 14, 7);
  const Image b = random_image(16, 14, 8);
  std::vector<double> grad(a.size());
  ssim_index(a.values(), b.values(), 16, 14, grad);
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); i += 3) {
    const double keep = a.values()[i];
    a.values()[i] = keep + 1e-5;
    const double up = ssim(a, b);
    a.values()[i] = keep - 1e-5;
    const double down = ssim(a, b);
    a.values()[i] = keep;
    const double num = (up - down) / 2e-5;
    worst = std::max(worst, std::abs(num - grad[i]) / std::max({std::abs(num), std::abs(grad[i]), 1e-6}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("histogram equalization") {
  const Image flat = hist_equalize(Image(5, 5, 0.3));
  for (double v : flat.values()) CHECK(v == 1.0);
  Image ramp(4, 1);
  ramp(0, 0) = 0.0;
  ramp(1, 0) = 0.25;
  ramp(2, 0) = 0.5;
  ramp(3, 0) = 1.0;
  const Image e = hist_equalize(ramp);
  CHECK(e(0, 0) == 0.25);
  CHECK(e(1, 0) == 0.5);
  CHECK(e(2, 0) == 0.75);
  CHECK(e(3, 0) == 1.0);
  // monotone
  const Image r = random_image(20, 20, 3);
  const Image q = hist_equalize(r);
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r.values()[i] < r.values()[j]) CHECK(q.values()[i] <= q.values()[j]);
    }
  }
}

TEST_CASE("frame matching") {
  const std::vector<Timestamp> recon{1000, 2000, 3000, 10000};
  const auto m = match_frames(recon, std::vector<Timestamp>{1500, 2999, 6000, 10001});
  REQUIRE(m.pairs.size() == 3);
  CHECK(m.pairs[0].recon == 0);  // tie between 1000 and 2000 -> earlier
  CHECK(m.pairs[1].recon == 2);
  CHECK(m.pairs[1].gap == 1);
  CHECK(m.pairs[2].recon == 3);
  CHECK(m.unmatched_gt == std::vector<std::size_t>{2});
  CHECK(m.unmatched_recon == std::vector<std::size_t>{1});

  // one recon can serve several GT frames
  const auto shared = match_frames(std::vector<Timestamp>{5000}, std::vector<Timestamp>{4500, 5500});
  CHECK(shared.pairs.size() == 2);
  CHECK(match_frames(std::vector<Timestamp>{}, std::vector<Timestamp>{1}).unmatched_gt.size() == 1);
  CHECK(match_frames(std::vector<Timestamp>{0}, std::vector<Timestamp>{1001}).pairs.empty());
  CHECK(match_frames(std::vector<Timestamp>{0}, std::vector<Timestamp>{1000}).pairs.size() == 1);
}

TEST_CASE("evaluate_sequence warm-up exclusion") {
  std::vector<Timestamp> gt_t, rec_t;
  for (int i = 0; i < 200; ++i) gt_t.push_back(i * 50000);  // 10 s at 20 Hz
  for (int i = 0; i <= 400; ++i) rec_t.push_back(i * 25000);
  const Image img = random_image(16, 16, 4);
  const auto gt = frames_at(gt_t, img);
  const auto rec = frames_at(rec_t, img);
  EvalOptions opt;
  opt.warmup = 2.0;
  const auto m = evaluate_sequence("s", rec, gt, opt);
  CHECK(m.matched == 160);
  CHECK(m.excluded == 40);
  CHECK(m.mse == 0.0);
  CHECK(m.ssim == doctest::Approx(1.0));
  CHECK(!m.empty);

  opt.tail = 1.0;
  CHECK(evaluate_sequence("s", rec, gt, opt).matched == 140);

  const auto none = evaluate_sequence("s", frames_at({77777777}, img), gt, EvalOptions{});
  CHECK(none.empty);
  CHECK(std::isnan(none.mse));
  CHECK(none.unmatched == 160);
}

TEST_CASE("aggregate table") {
  std::vector<MethodResults> res(2);
  res[0].method = "a";
  res[1].method = "b";
  const double am[] = {0.1234, 0.2, 0.3333}, bm[] = {0.05, 0.25, 0.3};
  for (int i = 0; i < 3; ++i) {
    SequenceMetrics s;
    s.sequence = "seq" + std::to_string(i);
    s.matched = 10;
    s.mse = am[i];
    s.ssim = 0.5;
    res[0].sequences.push_back(s);
    s.mse = bm[i];
    s.ssim = 0.6;
    res[1].sequences.push_back(s);
  }
  const auto t = aggregate_table(res);
  CHECK(t.mean_mse[0] == doctest::Approx((0.1234 + 0.2 + 0.3333) / 3));
  const std::string csv = t.to_csv();
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "sequence,method,mse,ssim,frames");
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 8);
  CHECK(lines[6].rfind("Mean,a,", 0) == 0);
  CHECK(lines[7] == "Mean,b,0.200000,0.600000,30");
  // mean row equals the mean of the displayed values to displayed precision
  double shown = 0;
  for (int i = 0; i < 3; ++i) shown += std::stod(lines[2 * i].substr(lines[2 * i].find(",a,") + 3));
  const double mean_shown = std::stod(lines[6].substr(7));
  CHECK(std::abs(mean_shown - shown / 3) <= 1e-6);
  const std::string text = t.to_text();
  CHECK(text.find("Mean") != std::string::npos);
  CHECK(text.find("0.050*") != std::string::npos);

  auto bad = res;
  bad[1].sequences.pop_back();
  CHECK_THROWS_AS(aggregate_table(bad), DataError);
}

TEST_CASE("latency quantiles") {
  EventStream s;
  for (Timestamp t = 0; t < 1000000; ++t) s.events.push_back(Event{0, 0, t, 1});
  const auto r = latency_report(s, 25000);
  CHECK(r.windows == 40);
  CHECK(r.min_us == 24999);
  CHECK(r.p25_us == 24999);
  CHECK(r.median_us == 24999);
  CHECK(r.p75_us == 24999);
  CHECK(r.max_us == 24999);

  std::mt19937_64 rng(5);
  std::exponential_distribution<double> gap(0.01);
  EventStream q;
  double t = 0;
  for (int i = 0; i < 50000; ++i) {
    t += gap(rng);
    q.events.push_back(Event{0, 0, static_cast<Timestamp>(t), 1});
  }
  const auto l = latency_report(q, 777);
  std::vector<double> d;
  for (std::size_t k = 0; (k + 1) * 777 <= q.size(); ++k) d.push_back(static_cast<double>(q.events[(k + 1) * 777 - 1].t - q.events[k * 777].t));
  std::sort(d.begin(), d.end());
  auto oracle = [&](double p) {
    const double pos = p * (d.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double frac = pos - lo;
    return frac == 0 ? d[lo] : d[lo] + frac * (d[lo + 1] - d[lo]);
  };
  CHECK(l.windows == d.size());
  CHECK(l.min_us == d.front());
  CHECK(l.p25_us == oracle(0.25));
  CHECK(l.median_us == oracle(0.5));
  CHECK(l.p75_us == oracle(0.75));
  CHECK(l.max_us == d.back());
  CHECK_THROWS_AS(latency_report(q, 100000), DataError);
}

TEST_CASE("throughput bench") {
  EventStream s;
  for (Timestamp t = 0; t < 1000000; ++t) s.events.push_back(Event{0, 0, t, 1});
  BenchMethod noop{"noop", [](const EventStream&) { return std::size_t{0}; }, {}};
  const auto r = throughput_bench(noop, s, 3);
  CHECK(r.mev_per_s > 0);
  CHECK(std::isfinite(r.mev_per_s));
  BenchMethod frames{"frames", [](const EventStream&) { return std::size_t{4}; }, [] {}};
  const auto f = throughput_bench(frames, s, 3);
  CHECK(f.frame_ms >= 0);
  const std::vector<BenchReport> reports{r, f};
  CHECK(bench_csv(reports).rfind("method,mev_per_s,frame_ms\nnoop,", 0) == 0);
  CHECK_THROWS(throughput_bench(noop, EventStream{}, 1));
}
