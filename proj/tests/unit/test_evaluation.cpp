#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bbtraj/evaluation.hpp"
#include "oracles.hpp"

using namespace bbtraj;

namespace {

BoxSequence seq(std::initializer_list<Eigen::RowVector4d> rows) {
  BoxSequence s{Matrix<double>(static_cast<Eigen::Index>(rows.size()), 4)};
  Eigen::Index i = 0;
  for (const auto& r : rows) s.rows.row(i++) = r;
  return s;
}

std::vector<MiniTrack> cv_minitracks(int count, int window, double vx, double vy) {
  SynthSpec spec;
  spec.vx = vx;
  spec.vy = vy;
  spec.length = window;
  spec.start_jitter = 50;
  return slice_minitracks(synth_tracks(spec, count), window, window);
}

}  // namespace

TEST(Metrics, ClosedForms) {
  const auto gt = seq({{0, 0, 1, 1}});
  EXPECT_EQ(ade(gt, gt), 0.0);
  EXPECT_EQ(ade(seq({{3, 4, 1, 1}}), gt), 5.0);
  EXPECT_EQ(fde(seq({{3, 4, 1, 1}}), gt), 5.0);

  // Error grows by one pixel per step.
  BoxSequence truth{Matrix<double>::Zero(10, 4)}, pred{Matrix<double>::Zero(10, 4)};
  for (int t = 0; t < 10; ++t) pred.rows(t, 0) = t + 1;
  for (int t = 1; t <= 10; ++t) EXPECT_EQ(fde_at(pred, truth, t), t);
  EXPECT_EQ(fde(pred, truth), 10.0);
  EXPECT_EQ(ade(pred, truth), 5.5);
}

TEST(Metrics, IgnoreSizeAndMatchLoopOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const BoxSequence a{bbtraj::testing::random_matrix(rng, 12, 4, 50.0)};
    BoxSequence b{bbtraj::testing::random_matrix(rng, 12, 4, 50.0)};
    double sum = 0;
    for (int i = 0; i < 12; ++i) sum += std::hypot(a.rows(i, 0) - b.rows(i, 0), a.rows(i, 1) - b.rows(i, 1));
    EXPECT_NEAR(ade(a, b), sum / 12, 1e-12);
    EXPECT_EQ(fde(a, b), fde_at(a, b, 12));
    const double before = ade(a, b);
    b.rows.col(2).array() += 17;
    EXPECT_EQ(ade(a, b), before);
  }
}

TEST(Metrics, Errors) {
  const auto a = seq({{0, 0, 1, 1}, {1, 1, 1, 1}});
  EXPECT_THROW(ade(a, seq({{0, 0, 1, 1}})), DimensionError);
  EXPECT_THROW(fde_at(a, a, 0), std::out_of_range);
  EXPECT_THROW(fde_at(a, a, 3), std::out_of_range);
}

TEST(Baselines, ExactOnTheirOwnMotionModels) {
  std::vector<Box> line, parabola;
  for (int i = 0; i < 40; ++i) {
    const double t = i;
    line.push_back({3 + 2 * t, 1 - t, 10 + 0.5 * t, 20, i});
    parabola.push_back({0.25 * t * t - t, 3 * t, 10, 20 + 0.1 * t * t, i});
  }
  const std::span<const Box> l(line), q(parabola);
  auto truth = [](std::span<const Box> boxes) {
    BoxSequence s{Matrix<double>(static_cast<Eigen::Index>(boxes.size()), 4)};
    for (std::size_t i = 0; i < boxes.size(); ++i) s.rows.row(static_cast<Eigen::Index>(i)) = boxes[i].values().transpose();
    return s;
  };
  const auto cv = baseline_predict(BaselineKind::kConstantVelocity, l.first(30), 10);
  EXPECT_LT((cv.rows - truth(l.subspan(30)).rows).cwiseAbs().maxCoeff(), 1e-9);
  const auto ca = baseline_predict(BaselineKind::kConstantAcceleration, q.first(30), 10);
  EXPECT_LT((ca.rows - truth(q.subspan(30)).rows).cwiseAbs().maxCoeff(), 1e-9);

  const auto st = baseline_predict(BaselineKind::kStationary, l.first(30), 10);
  for (int t = 1; t <= 10; ++t) EXPECT_NEAR(fde_at(st, truth(l.subspan(30)), t), t * std::sqrt(5.0), 1e-9);

  EXPECT_THROW(baseline_predict(BaselineKind::kConstantAcceleration, l.first(2), 5), InputError);
  EXPECT_THROW(baseline_predict(BaselineKind::kConstantVelocity, l.first(1), 5), InputError);
  EXPECT_EQ(parse_baseline_kind("ca"), BaselineKind::kConstantAcceleration);
  EXPECT_THROW(parse_baseline_kind("kalman"), ConfigError);
}

TEST(Evaluate, StationaryBaselineClosedForm) {
  const auto mts = cv_minitracks(8, 90, 2, 1);
  const auto r = evaluate(baseline_predictor(BaselineKind::kStationary, 60), mts, 30);
  EXPECT_EQ(r.n_samples, 8u);
  EXPECT_EQ(r.horizon, 60);
  for (int t = 1; t <= 60; ++t) EXPECT_NEAR(r.fde_at(t), t * std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(r.ade, 30.5 * std::sqrt(5.0), 1e-9);
  EXPECT_EQ(r.fde, r.fde_at(60));

  const auto cv = evaluate(baseline_predictor(BaselineKind::kConstantVelocity, 60), mts, 30);
  EXPECT_NEAR(cv.ade, 0.0, 1e-9);
  EXPECT_NEAR(cv.fde, 0.0, 1e-9);
}

TEST(Evaluate, AggregationMatchesPerSampleRecomputation) {
  SynthSpec spec;
  spec.kind = MotionKind::kSinusoidal;
  spec.noise_stddev = 1.5;
  spec.velocity_jitter = 1.0;
  spec.length = 30;
  const auto mts = slice_minitracks(synth_tracks(spec, 13), 30, 30);
  const int k = 10, p = 20;
  const auto r = evaluate(baseline_predictor(BaselineKind::kConstantVelocity, p), mts, k);

  double ade_sum = 0;
  std::vector<double> step(p, 0.0);
  for (const auto& mt : mts) {
    const Box& last = mt.boxes[k - 1];
    const Box& prev = mt.boxes[k - 2];
    for (int t = 1; t <= p; ++t) {
      const double px = last.cx + t * (last.cx - prev.cx), py = last.cy + t * (last.cy - prev.cy);
      const Box& g = mt.boxes[k - 1 + t];
      const double d = std::sqrt((px - g.cx) * (px - g.cx) + (py - g.cy) * (py - g.cy));
      ade_sum += d / p;
      step[t - 1] += d / mts.size();
    }
  }
  EXPECT_NEAR(r.ade, ade_sum / mts.size(), 1e-9);
  for (int t = 1; t <= p; ++t) EXPECT_NEAR(r.fde_at(t), step[t - 1], 1e-9);
  EXPECT_NEAR(r.ade_upto(p), r.ade, 1e-9);
}

TEST(Evaluate, ModelPathAndErrors) {
  ModelConfig cfg;
  cfg.k = 5;
  cfg.p = 4;
  cfg.hidden = 6;
  cfg.latent = 3;
  auto params = ModelParams<double>::zeros(cfg);
  params.future_decoder_fc.bias << 2, 1, 0, 0;  // a perfect constant-velocity stub
  const auto mts = cv_minitracks(4, 9, 2, 1);
  const auto r = evaluate(params, std::span<const MiniTrack>(mts));
  EXPECT_NEAR(r.ade, 0.0, 1e-9);
  EXPECT_NEAR(r.fde, 0.0, 1e-9);
  EXPECT_EQ(r.nonpositive_sizes, 0u);

  EXPECT_THROW(evaluate(params, std::span<const MiniTrack>{}), ConfigError);
  const auto wrong = cv_minitracks(2, 12, 1, 1);
  EXPECT_THROW(evaluate(params, std::span<const MiniTrack>(wrong)), ConfigError);
}

TEST(Evaluate, CsvOutputs) {
  const auto mts = cv_minitracks(3, 90, 2, 1);
  const auto r = evaluate(baseline_predictor(BaselineKind::kStationary, 60), mts, 30);
  std::ostringstream m, s;
  write_metrics_csv(m, r);
  write_per_step_csv(s, r);
  EXPECT_EQ(m.str().substr(0, m.str().find('\n')), "ade,fde,n_samples,k,p,nonpositive_sizes");
  std::size_t lines = 0;
  for (char c : s.str()) lines += c == '\n';
  EXPECT_EQ(lines, 61u);
}

TEST(Benchmark, ReportsPositiveThroughput) {
  ModelConfig cfg;
  cfg.hidden = 32;
  cfg.latent = 16;
  const auto params = ModelParams<float>::initialized(cfg, 1);
  const auto r = benchmark_tps(params, 2, 0.2);
  EXPECT_EQ(r.threads, 2);
  EXPECT_GT(r.trajectories_per_second, 0.0);
  EXPECT_EQ(r.equivalent_fps, r.trajectories_per_second * cfg.p);
  EXPECT_EQ(r.per_thread.size(), 2u);
  std::size_t sum = 0;
  for (auto n : r.per_thread) sum += n;
  EXPECT_EQ(sum, r.predictions);
  EXPECT_NEAR(r.trajectories_per_second, r.predictions / r.seconds, 1e-6 * r.trajectories_per_second);
  EXPECT_THROW(benchmark_tps(params, 0, 1.0), ConfigError);

  std::ostringstream out;
  const std::vector<BenchReport> rows = {r};
  write_bench_csv(out, rows);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "threads,tps,fps,seconds,predictions,k,p,hidden,latent,reference_tps");
}

TEST(Ablation, TableShapeAndCsv) {
  TrainConfig cfg;
  cfg.model.k = 6;
  cfg.model.p = 8;
  cfg.model.hidden = 8;
  cfg.model.latent = 4;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  const auto mts = cv_minitracks(6, 14, 1, 0.5);
  AblationOptions opt;
  opt.horizons = {2, 4, 6, 8};
  const auto table = ablation_run(cfg, mts, mts, opt);
  EXPECT_EQ(table.cells.size(), 12u);
  for (const auto& c : table.cells) {
    EXPECT_GE(c.ade, 0.0);
    EXPECT_GE(c.fde, 0.0);
  }
  std::ostringstream out;
  write_ablation_csv(out, table);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header,
            "input,predicted,traj-del_ade,traj-del_fde,traj_ade,traj_fde,traj+auto-enc_ade,traj+auto-enc_fde");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);

  opt.retrain_per_horizon = true;
  opt.modes = {LossMode::kTraj};
  opt.horizons = {3, 8};
  EXPECT_EQ(ablation_run(cfg, mts, mts, opt).cells.size(), 2u);
  opt.horizons = {9};
  EXPECT_THROW(ablation_run(cfg, mts, mts, opt), ConfigError);
}

TEST(CrossValidation, ThreeFoldsAndMeanOfMeans) {
  TrainConfig cfg;
  cfg.model.k = 5;
  cfg.model.p = 5;
  cfg.model.hidden = 6;
  cfg.model.latent = 3;
  cfg.epochs = 1;
  cfg.batch_size = 8;
  SynthSpec spec;
  spec.length = 30;
  spec.velocity_jitter = 1;
  const auto tracks = synth_tracks(spec, 9);
  int folds_seen = 0;
  const auto cv = cross_validate(cfg, tracks, 3, 10, 1,
                                 [&](int, const TrainResult&, const FoldResult&) { ++folds_seen; });
  EXPECT_EQ(folds_seen, 3);
  ASSERT_EQ(cv.folds.size(), 3u);
  double mean = 0;
  for (const auto& f : cv.folds) {
    EXPECT_EQ(f.test_minitracks, 3u * 3u);
    mean += f.report.ade / 3;
  }
  EXPECT_NEAR(cv.mean_ade, mean, 1e-12);
  std::ostringstream out;
  write_cv_csv(out, cv);
  EXPECT_NE(out.str().find("mean,,,"), std::string::npos);
}
