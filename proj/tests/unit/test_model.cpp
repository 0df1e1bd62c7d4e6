#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "bbtraj/model.hpp"
#include "oracles.hpp"

using namespace bbtraj;
using bbtraj::testing::prefix_sum_oracle;
using bbtraj::testing::random_matrix;
using bbtraj::testing::random_params;
using bbtraj::testing::random_sample;

namespace {

ModelConfig tiny(int k = 4, int p = 3, int h = 8, int z = 6) {
  ModelConfig c;
  c.k = k;
  c.p = p;
  c.hidden = h;
  c.latent = z;
  return c;
}

std::vector<Box> walking_boxes(int n, double vx, double vy, std::int64_t frame0 = 0) {
  std::vector<Box> out;
  for (int i = 0; i < n; ++i) out.push_back({100 + vx * i, 50 + vy * i, 10, 20, frame0 + i});
  return out;
}

}  // namespace

TEST(ParameterCount, PaperConfiguration) {
  // encoder 4*512*(8+512) + 2*2048, FC 512*256 + 256, auto-decoder
  // 4*512*(256+512) + 2*2048, FC 512*8 + 8, future decoder as auto-decoder,
  // FC 512*4 + 4.
  const std::size_t enc = 4 * 512 * (8 + 512) + 2 * 2048;
  const std::size_t dec = 4 * 512 * (256 + 512) + 2 * 2048;
  const std::size_t want = enc + (512 * 256 + 256) + dec + (512 * 8 + 8) + dec + (512 * 4 + 4);
  EXPECT_EQ(want, 4'360'460u);
  EXPECT_EQ(parameter_count(ModelConfig{}), want);
  EXPECT_EQ(ModelParams<double>::zeros(ModelConfig{}).size(), want);
}

TEST(ModelConfig, Validation) {
  EXPECT_NO_THROW(ModelConfig{}.validate());
  auto c = tiny();
  c.hidden = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.p = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(BuildFeatures, TwoBoxExample) {
  const std::vector<Box> boxes = {{0, 0, 2, 2, 0}, {1, 2, 2, 2, 1}};
  const auto f = build_features(boxes);
  Matrix<double> want(2, 8);
  want << 0, 0, 2, 2, 0, 0, 0, 0, 1, 2, 2, 2, 1, 2, 0, 0;
  EXPECT_EQ(f.rows, want);
}

TEST(BuildFeatures, PredecessorFeedsFirstDelta) {
  const std::vector<Box> boxes = {{5, 5, 4, 4, 8}, {6, 5, 4, 4, 9}};
  const auto f = build_features(boxes, Box{3, 4, 4, 3, 7});
  EXPECT_EQ(f.rows(0, 4), 2);
  EXPECT_EQ(f.rows(0, 5), 1);
  EXPECT_EQ(f.rows(0, 7), 1);
}

TEST(BuildFeatures, StationaryHasZeroDeltas) {
  std::vector<Box> boxes(30, Box{7, 9, 3, 5, 0});
  for (int i = 0; i < 30; ++i) boxes[i].frame = i;
  EXPECT_TRUE(build_features(boxes).rows.rightCols(4).isZero());
}

TEST(BuildFeatures, DeltasMatchDifferencingLoop) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(1, 200);
  std::vector<Box> boxes;
  for (int i = 0; i < 30; ++i) boxes.push_back({d(rng), d(rng), d(rng), d(rng), 100 + i});
  const auto f = build_features(boxes);
  for (int i = 1; i < 30; ++i) {
    EXPECT_EQ(f.rows(i, 4), boxes[i].cx - boxes[i - 1].cx);
    EXPECT_EQ(f.rows(i, 5), boxes[i].cy - boxes[i - 1].cy);
    EXPECT_EQ(f.rows(i, 6), boxes[i].w - boxes[i - 1].w);
    EXPECT_EQ(f.rows(i, 7), boxes[i].h - boxes[i - 1].h);
  }
}

TEST(BuildFeatures, RejectsBadInput) {
  EXPECT_THROW(build_features(std::vector<Box>{}), InputError);
  EXPECT_THROW(build_features(std::vector<Box>{{0, 0, 0, 2, 0}}), InputError);
  EXPECT_THROW(build_features(std::vector<Box>{{0, 0, 2, 2, 0}, {0, 0, 2, 2, 2}}), InputError);
}

TEST(ReconstructionTarget, ReverseAndNegate) {
  FeatureWindow w{Matrix<double>(2, 8)};
  w.rows << 0, 0, 2, 2, 0, 0, 0, 0, 1, 2, 2, 2, 1, 2, 0, 0;
  Matrix<double> want(2, 8);
  want << 1, 2, 2, 2, -1, -2, 0, 0, 0, 0, 2, 2, 0, 0, 0, 0;
  EXPECT_EQ(reconstruction_target(w).rows, want);
}

TEST(ReconstructionTarget, InvolutionAndStationaryFixedPoint) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureWindow w{random_matrix(rng, 1 + trial % 9, 8, 100.0)};
    EXPECT_EQ(reconstruction_target(reconstruction_target(w)).rows, w.rows);
  }
  FeatureWindow still{Matrix<double>::Zero(5, 8)};
  still.rows.leftCols(4).rowwise() = Eigen::RowVector4d(3, 4, 5, 6);
  EXPECT_EQ(reconstruction_target(still).rows, still.rows);
}

TEST(Encode, ZeroParamsGiveFcBias) {
  auto p = ModelParams<double>::zeros(tiny());
  p.encoder_fc.bias.setLinSpaced(6, -1, 1);
  std::mt19937_64 rng(1);
  const auto enc = encode(p, FeatureWindow{random_matrix(rng, 4, 8)});
  EXPECT_EQ(enc.latent, p.encoder_fc.bias);
  EXPECT_TRUE(enc.final_state.h.isZero());
}

TEST(Encode, PaperLatentWidth) {
  auto p = ModelParams<float>::initialized(ModelConfig{}, 1);
  std::vector<Box> boxes = walking_boxes(30, 1, 0);
  EXPECT_EQ(encode(p, build_features(boxes)).latent.size(), 256);
}

TEST(Encode, MatchesComposedKernels) {
  std::mt19937_64 rng(11);
  const auto cfg = tiny(5, 3, 7, 4);
  const auto p = random_params(cfg, rng);
  const FeatureWindow w{random_matrix(rng, 5, 8)};
  auto s = LstmCellState<double>::zeros(7);
  for (int t = 0; t < 5; ++t) s = lstm_cell_forward(p.encoder, Vector<double>(w.rows.row(t).transpose()), s).first;
  const Vector<double> z = linear_forward(p.encoder_fc.weight, p.encoder_fc.bias, relu(s.h));
  const auto enc = encode(p, w);
  EXPECT_LT((enc.latent - z).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((enc.final_state.c - s.c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Reconstruct, ZeroParamsGiveFcBiasRows) {
  auto p = ModelParams<double>::zeros(tiny());
  p.auto_decoder_fc.bias.setLinSpaced(8, 0, 7);
  const auto r = reconstruct(p, Vector<double>(Vector<double>::Ones(6)));
  ASSERT_EQ(r.rows.rows(), 4);
  ASSERT_EQ(r.rows.cols(), 8);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(Vector<double>(r.rows.row(t).transpose()), p.auto_decoder_fc.bias);
}

TEST(Reconstruct, MatchesUnrolledOracle) {
  std::mt19937_64 rng(12);
  const auto cfg = tiny(6, 2, 5, 3);
  const auto p = random_params(cfg, rng);
  const Vector<double> z = random_matrix(rng, 3, 1);
  auto s = LstmCellState<double>::zeros(5);
  const auto r = reconstruct(p, z);
  for (int t = 0; t < 6; ++t) {
    s = lstm_cell_forward(p.auto_decoder, z, s).first;
    const Vector<double> row = linear_forward(p.auto_decoder_fc.weight, p.auto_decoder_fc.bias, s.h);
    EXPECT_LT((Vector<double>(r.rows.row(t).transpose()) - row).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DecodeFuture, ZeroParamsGiveFcBiasRows) {
  auto p = ModelParams<double>::zeros(tiny());
  p.future_decoder_fc.bias << 1, 2, 3, 4;
  const auto d = decode_future(p, Vector<double>(Vector<double>::Ones(6)), LstmCellState<double>::zeros(8));
  ASSERT_EQ(d.rows.rows(), 3);
  for (int t = 0; t < 3; ++t) EXPECT_EQ(Vector<double>(d.rows.row(t).transpose()), p.future_decoder_fc.bias);
}

TEST(DecodeFuture, MatchesUnrolledOracleForBothInitModes) {
  for (auto init : {DecoderInit::kFullState, DecoderInit::kHiddenOnly}) {
    std::mt19937_64 rng(13);
    auto cfg = tiny(3, 5, 6, 4);
    cfg.decoder_init = init;
    const auto p = random_params(cfg, rng);
    const Vector<double> z = random_matrix(rng, 4, 1);
    const LstmCellState<double> enc{random_matrix(rng, 6, 1), random_matrix(rng, 6, 1)};
    auto s = enc;
    if (init == DecoderInit::kHiddenOnly) s.c.setZero();
    const auto d = decode_future(p, z, enc);
    for (int t = 0; t < 5; ++t) {
      s = lstm_cell_forward(p.future_decoder, z, s).first;
      const Vector<double> row =
          linear_forward(p.future_decoder_fc.weight, p.future_decoder_fc.bias, s.h);
      EXPECT_LT((Vector<double>(d.rows.row(t).transpose()) - row).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(ConcatTrajectory, Examples) {
  DeltaSequence d{Matrix<double>(2, 4)};
  d.rows << 1, 1, 0, 0, 1, 1, 0, 0;
  Matrix<double> want(2, 4);
  want << 11, 21, 5, 8, 12, 22, 5, 8;
  EXPECT_EQ(concat_trajectory(d, {10, 20, 5, 8}).rows, want);

  const auto still = concat_trajectory(DeltaSequence{Matrix<double>::Zero(60, 4)}, {1, 2, 3, 4});
  for (int i = 0; i < 60; ++i) EXPECT_EQ(still.rows.row(i), Eigen::RowVector4d(1, 2, 3, 4));

  EXPECT_THROW(concat_trajectory(DeltaSequence{Matrix<double>(0, 4)}, {0, 0, 0, 0}), InputError);
}

TEST(ConcatTrajectory, PrefixSumOracleAndDifferenceInvariant) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(1, 80);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Vector4d anchor = random_matrix(rng, 4, 1, 500.0);
    const DeltaSequence d{random_matrix(rng, len(rng), 4, 5.0)};
    const auto out = concat_trajectory(d, anchor);
    ASSERT_EQ(out.rows, prefix_sum_oracle(d.rows, anchor));
    Matrix<double> prev_row = anchor.transpose();
    for (Eigen::Index i = 0; i < d.length(); ++i) {
      // out_i = out_{i-1} + d_i was computed as exactly this addition.
      ASSERT_EQ(out.rows.row(i), prev_row + d.rows.row(i));
      prev_row = out.rows.row(i);
    }
  }
}

TEST(ConcatTrajectory, BackwardIsSuffixSum) {
  std::mt19937_64 rng(5);
  const auto g = random_matrix(rng, 6, 4);
  const auto back = concat_trajectory_backward(g);
  for (int i = 0; i < 6; ++i) {
    Eigen::RowVector4d acc = Eigen::RowVector4d::Zero();
    for (int j = i; j < 6; ++j) acc += g.row(j);
    EXPECT_LT((back.row(i) - acc).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ForwardTrain, ShapesAndComposition) {
  std::mt19937_64 rng(21);
  const auto cfg = tiny(4, 7, 6, 5);
  const auto p = random_params(cfg, rng);
  const auto boxes = walking_boxes(4, 2, 1);
  const auto w = build_features(boxes);
  const auto out = forward_train(p, w);
  EXPECT_EQ(out.reconstruction.rows.rows(), 4);
  EXPECT_EQ(out.reconstruction.rows.cols(), 8);
  EXPECT_EQ(out.trajectory.rows.rows(), 7);
  EXPECT_EQ(out.trajectory.rows.cols(), 4);

  const auto enc = encode(p, w);
  EXPECT_EQ(out.reconstruction.rows, reconstruct(p, enc.latent).rows);
  const auto deltas = decode_future(p, enc.latent, enc.final_state);
  EXPECT_EQ(out.deltas.rows, deltas.rows);
  EXPECT_EQ(out.trajectory.rows, concat_trajectory(deltas, w.anchor()).rows);
}

TEST(ForwardTrain, AutoDecoderDoesNotAffectFutureHead) {
  std::mt19937_64 rng(22);
  const auto cfg = tiny();
  auto p = random_params(cfg, rng);
  const auto w = build_features(walking_boxes(4, 1, 3));
  const auto before = forward_train(p, w).trajectory.rows;
  p.auto_decoder = LstmCellParams<double>::zeros(cfg.hidden, cfg.latent);
  p.auto_decoder_fc = Linear<double>::zeros(8, cfg.hidden);
  EXPECT_EQ(forward_train(p, w).trajectory.rows, before);
}

TEST(Predict, StubDecoderEmitsConstantDelta) {
  std::mt19937_64 rng(23);
  const auto cfg = tiny(5, 6, 8, 6);
  auto p = random_params(cfg, rng);
  p.future_decoder_fc.weight.setZero();
  p.future_decoder_fc.bias << 1, 0, 0, 0;
  auto past = walking_boxes(5, 0, 0);  // ends at (100, 50, 10, 20)
  const auto out = predict(p, past);
  ASSERT_EQ(out.length(), 6);
  for (int t = 0; t < 6; ++t) EXPECT_EQ(out.rows.row(t), Eigen::RowVector4d(101 + t, 50, 10, 20));
}

TEST(Predict, EqualsForwardTrainHeadBitwise) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto cfg = tiny(6, 9, 10, 7);
    const auto p = random_params(cfg, rng);
    const auto past = walking_boxes(6, 1.5, -0.5, 40);
    const Box pred{98.5, 50.5, 10, 20, 39};
    EXPECT_EQ(predict(p, past, pred).rows, forward_train(p, build_features(past, pred)).trajectory.rows);
    const auto pf = p.cast<float>();
    EXPECT_EQ(predict(pf, past).rows, forward_train(pf, build_features(past)).trajectory.rows);
  }
}

TEST(Predict, WrongLengthIsInputError) {
  auto p = ModelParams<double>::zeros(tiny());
  EXPECT_THROW(predict(p, walking_boxes(3, 1, 1)), InputError);
}

TEST(CompositeLoss, PerfectPredictionsAndWeightedSum) {
  // Build outputs and sample by hand so each L1 term is controlled exactly.
  Sample sample;
  sample.input.rows = Matrix<double>::Zero(2, 8);
  sample.input.rows.leftCols(4).setConstant(1.0);
  sample.future.rows = Matrix<double>::Constant(2, 4, 1.0);
  sample.future_deltas.rows = Matrix<double>::Zero(2, 4);

  ForwardOutputs<double> perfect;
  perfect.reconstruction = reconstruction_target(sample.input);
  perfect.deltas = sample.future_deltas;
  perfect.trajectory = sample.future;
  for (auto mode : {LossMode::kTrajDelta, LossMode::kTraj, LossMode::kTrajAutoEnc}) {
    LossWeights w;
    w.mode = mode;
    EXPECT_EQ(composite_loss(perfect, sample, w).terms.total, 0.0);
  }

  ForwardOutputs<double> off = perfect;
  off.reconstruction.rows.array() += 0.5;
  off.trajectory.rows.array() += 0.5;
  const auto loss = composite_loss(off, sample, LossWeights{});
  EXPECT_DOUBLE_EQ(loss.terms.auto_enc, 0.5);
  EXPECT_DOUBLE_EQ(loss.terms.traj, 0.5);
  EXPECT_DOUBLE_EQ(loss.terms.total, 1.5);
}

TEST(CompositeLoss, FullModelGradientMatchesFiniteDifferences) {
  for (auto mode : {LossMode::kTrajDelta, LossMode::kTraj, LossMode::kTrajAutoEnc}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      EXPECT_LT(bbtraj::testing::model_gradient_error(tiny(), mode, seed), 1e-4)
          << to_string(mode) << " seed " << seed;
    }
  }
}

TEST(CompositeLoss, HiddenOnlyInitGradientMatchesFiniteDifferences) {
  auto cfg = tiny();
  cfg.decoder_init = DecoderInit::kHiddenOnly;
  EXPECT_LT(bbtraj::testing::model_gradient_error(cfg, LossMode::kTrajAutoEnc, 4), 1e-4);
}

TEST(CompositeLoss, GradientsAccumulateIntoBuffer) {
  std::mt19937_64 rng(31);
  const auto cfg = tiny();
  const auto p = random_params(cfg, rng);
  const auto s = random_sample(cfg, rng);
  auto once = ModelParams<double>::zeros(cfg);
  loss_and_gradient(p, s, LossWeights{}, once);
  auto twice = ModelParams<double>::zeros(cfg);
  loss_and_gradient(p, s, LossWeights{}, twice);
  loss_and_gradient(p, s, LossWeights{}, twice);
  EXPECT_LT((flatten(twice) - 2.0 * flatten(once)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LossMode, NamesRoundTrip) {
  for (auto mode : {LossMode::kTrajDelta, LossMode::kTraj, LossMode::kTrajAutoEnc}) {
    EXPECT_EQ(parse_loss_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_loss_mode("bogus"), ConfigError);
}

TEST(MakeSample, DeltasRelativeToLastPastBox) {
  const auto boxes = walking_boxes(7, 2, 1);
  const std::span<const Box> all(boxes);
  const auto s = make_sample(all.first(4), all.subspan(4));
  EXPECT_EQ(s.input.length(), 4);
  EXPECT_EQ(s.future.length(), 3);
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(s.future_deltas.rows.row(t), Eigen::RowVector4d(2, 1, 0, 0));
    EXPECT_EQ(s.future.rows(t, 0), boxes[4 + t].cx);
  }
}

TEST(ModelParams, InitializationIsSeededAndBounded) {
  const auto cfg = tiny(4, 3, 16, 6);
  const auto a = ModelParams<double>::initialized(cfg, 5);
  const auto b = ModelParams<double>::initialized(cfg, 5);
  const auto c = ModelParams<double>::initialized(cfg, 6);
  EXPECT_EQ(flatten(a), flatten(b));
  EXPECT_NE(flatten(a), flatten(c));
  EXPECT_LE(a.encoder.recurrent_weights.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_TRUE(a.encoder.input_bias.isZero());
  EXPECT_TRUE(a.future_decoder_fc.bias.isZero());
}

TEST(ModelParams, FlattenRoundTrip) {
  std::mt19937_64 rng(8);
  const auto cfg = tiny();
  const auto p = random_params(cfg, rng);
  auto q = ModelParams<double>::zeros(cfg);
  unflatten(flatten(p), q);
  EXPECT_EQ(flatten(q), flatten(p));
  EXPECT_EQ(static_cast<std::size_t>(flatten(p).size()), parameter_count(cfg));
}
