#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "pointpred/esn.hpp"
#include "pointpred/synth.hpp"

using namespace pointpred;

namespace {

EsnConfig small_config(std::size_t n_reservoir, std::size_t n_inputs, std::uint64_t seed = 1) {
  EsnConfig c;
  c.n_reservoir = n_reservoir;
  c.n_inputs = n_inputs;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(SpectralRadius, SimpleMatrices) {
  EXPECT_NEAR(spectral_radius(Eigen::MatrixXd::Identity(3, 3)), 1.0, 1e-10);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d(0, 0) = 0.5;
  d(1, 1) = -0.9;
  EXPECT_NEAR(spectral_radius(d), 0.9, 1e-9);
  EXPECT_DOUBLE_EQ(spectral_radius(Eigen::MatrixXd::Zero(4, 4)), 0.0);
  EXPECT_THROW(spectral_radius(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(SpectralRadius, AgreesWithDenseEigensolver) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd M(128, 128);
    for (Eigen::Index i = 0; i < M.rows(); ++i)
      for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) = rng.uniform();
    EXPECT_NEAR(spectral_radius(M), spectral_radius_dense(M), 1e-6);
  }
}

TEST(SpectralRadius, DenseHandlesComplexPair) {
  Eigen::MatrixXd M(2, 2);
  M << 0.6, -0.8, 0.8, 0.6;
  EXPECT_NEAR(spectral_radius_dense(M), 1.0, 1e-12);
}

TEST(Build, DefaultConfigHitsTargetRadius) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EsnConfig c;
    c.seed = seed;
    const auto m = build(c);
    EXPECT_NEAR(spectral_radius_dense(m.W), 0.99, 1e-6);
    EXPECT_EQ(m.W.rows(), 128);
    EXPECT_EQ(m.W_in.cols(), 10);
    EXPECT_EQ(m.W_fb.size(), 128);
    EXPECT_GE(m.W_in.minCoeff(), 0.0);
    EXPECT_LT(m.W_in.maxCoeff(), 1.0);
    EXPECT_GE(m.W_fb.minCoeff(), 0.0);
    EXPECT_TRUE(m.y.isZero());
    EXPECT_EQ(m.z_prev, 0.0);
    EXPECT_FALSE(m.trained());
  }
}

TEST(Build, SignedWeightInterval) {
  auto c = small_config(64, 10, 3);
  c.weight_lo = -1.0;
  const auto m = build(c);
  EXPECT_NEAR(spectral_radius_dense(m.W), 0.99, 1e-6);
  EXPECT_LT(m.W_in.minCoeff(), 0.0);
}

TEST(Build, SameSeedSameMatrices) {
  const auto a = build(small_config(32, 4, 9));
  const auto b = build(small_config(32, 4, 9));
  const auto c = build(small_config(32, 4, 10));
  EXPECT_EQ(a.W, b.W);
  EXPECT_EQ(a.W_in, b.W_in);
  EXPECT_EQ(a.W_fb, b.W_fb);
  EXPECT_NE(a.W, c.W);
}

TEST(Build, RejectsBadConfig) {
  EsnConfig c;
  c.spectral_radius_target = 1.0;
  EXPECT_THROW(build(c), ConfigError);
  c = EsnConfig{};
  c.weight_lo = 1.0;
  EXPECT_THROW(build(c), ConfigError);
  c = EsnConfig{};
  c.target_clip = 0.5;
  EXPECT_THROW(build(c), ConfigError);
}

TEST(Step, AllZeroWeightsGiveHalf) {
  EchoStateModel m(small_config(5, 3), Eigen::MatrixXd::Zero(5, 5), Eigen::MatrixXd::Zero(5, 3),
                   Eigen::VectorXd::Zero(5));
  Eigen::VectorXd x(3);
  x << 1, 0, 1;
  for (int t = 0; t < 3; ++t) {
    const auto& y = m.step(x, 0.7);
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(y(i), 0.5);
  }
}

TEST(Step, HandComputedTwoNodes) {
  Eigen::MatrixXd W(2, 2), W_in(2, 1);
  Eigen::VectorXd W_fb(2);
  W << 0.2, 0.4, 0.0, 0.5;
  W_in << 1.0, -1.0;
  W_fb << 0.3, 0.6;
  EchoStateModel m(small_config(2, 1), W, W_in, W_fb);
  Eigen::VectorXd x(1);
  x << 1.0;
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  // From y = 0 with feedback 0.5: pre = (1 + 0.15, -1 + 0.3).
  const double y0 = sig(1.15), y1 = sig(-0.7);
  const auto& first = m.step(x, 0.5);
  EXPECT_NEAR(first(0), y0, 1e-15);
  EXPECT_NEAR(first(1), y1, 1e-15);
  EXPECT_DOUBLE_EQ(m.z_prev, 0.5);
  x << 0.0;
  const auto& second = m.step(x, 0.0);
  EXPECT_NEAR(second(0), sig(0.2 * y0 + 0.4 * y1), 1e-15);
  EXPECT_NEAR(second(1), sig(0.5 * y1), 1e-15);
}

TEST(Step, DimensionMismatch) {
  auto m = build(small_config(8, 3));
  EXPECT_THROW(m.step(Eigen::VectorXd::Zero(2), 0.0), std::invalid_argument);
  EXPECT_THROW(EchoStateModel(small_config(2, 1), Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(2, 1),
                              Eigen::VectorXd::Zero(2)),
               std::invalid_argument);
}

TEST(Step, StatesStayInLogisticRange) {
  auto m = build(EsnConfig{});
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd x(10);
    for (Eigen::Index i = 0; i < 10; ++i) x(i) = rng.bernoulli(0.5);
    const auto& y = m.step(x, rng.uniform());
    EXPECT_GT(y.minCoeff(), 0.0);
    EXPECT_LT(y.maxCoeff(), 1.0);
  }
}

TEST(EchoStateProperty, InitialConditionsWashOut) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EsnConfig c;
    c.seed = seed;
    auto a = build(c);
    auto b = a;
    b.y = Eigen::VectorXd::Ones(128);
    Rng rng(seed + 100);
    for (int t = 0; t < 1000; ++t) {
      Eigen::VectorXd x(10);
      for (Eigen::Index i = 0; i < 10; ++i) x(i) = rng.bernoulli(0.3);
      const double fb = rng.bernoulli(0.3) ? 0.99 : 0.01;
      a.step(x, fb);
      b.step(x, fb);
    }
    EXPECT_LT((a.y - b.y).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(EchoStateProperty, ZeroInputFromDifferentStates) {
  auto a = build(small_config(32, 4, 5));
  auto b = a;
  b.y = Eigen::VectorXd::Constant(32, 0.9);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  double gap = (a.y - b.y).norm();
  for (int t = 0; t < 50; ++t) {
    a.step(x, 0.0);
    b.step(x, 0.0);
    const double next = (a.y - b.y).norm();
    EXPECT_LE(next, gap + 1e-15);
    gap = next;
  }
  EXPECT_LT(gap, 1e-12);
}

TEST(InputWindow, MostRecentBitsOldestFirst) {
  const Bits bits = {1, 0, 1, 1, 0};
  const std::span<const std::uint8_t> s(bits);
  EXPECT_EQ(input_window(s, 0, 3), Eigen::Vector3d(0, 0, 0));
  EXPECT_EQ(input_window(s, 1, 3), Eigen::Vector3d(0, 0, 1));
  EXPECT_EQ(input_window(s, 4, 3), Eigen::Vector3d(0, 1, 1));
  EXPECT_EQ(input_window(s, 5, 3), Eigen::Vector3d(1, 1, 0));
}

TEST(Readout, ProblemShape) {
  const auto s = generate(make_bursting(0.9, 0.8), 3, 96, 1);
  const auto m = build(EsnConfig{});
  const auto p = readout_problem(m, s);
  EXPECT_EQ(p.S.cols(), 138);
  EXPECT_EQ(p.S.rows(), 3 * (96 - 20));
  EXPECT_NEAR(p.D.cwiseAbs().maxCoeff(), std::log(99.0), 1e-12);
  const auto t = train(m, s);
  ASSERT_TRUE(t.trained());
  EXPECT_EQ(t.W_out->size(), 138);
}

TEST(Readout, TooShortSeries) {
  const auto m = build(EsnConfig{});
  EXPECT_THROW(readout_problem(m, BinarySeries::from_string(std::string(30, '0'), 30)), DataError);
  // Long enough overall but every day sits inside the washout.
  EXPECT_THROW(readout_problem(m, BinarySeries::from_string(std::string(40, '0'), 10)), DataError);
}

TEST(Readout, ResidualOrthogonalToColumns) {
  const auto s = generate(make_three_state(), 20, 96, 4);
  const auto m = build(EsnConfig{});
  const auto p = readout_problem(m, s);
  const auto t = train(m, s);
  const Eigen::VectorXd r = p.D - p.S * t.W_out->transpose();
  const double scale = p.S.norm() * p.D.norm();
  EXPECT_LE((p.S.transpose() * r).cwiseAbs().maxCoeff(), 1e-6 * scale);
}

TEST(Readout, PerturbationsNeverBeatFit) {
  const auto s = generate(make_bursting(0.9, 0.8), 20, 96, 6);
  const auto m = build(EsnConfig{});
  const auto p = readout_problem(m, s);
  const auto t = train(m, s);
  const double best = readout_mse(p, *t.W_out);
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    Eigen::RowVectorXd w = *t.W_out;
    const double eps = std::pow(10.0, -1.0 - 5.0 * rng.uniform());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += eps * (2 * rng.uniform() - 1);
    EXPECT_GE(readout_mse(p, w), best * (1 - 1e-12));
  }
}

TEST(Predict, ConstantZeroSeries) {
  const auto s = BinarySeries::from_string(std::string(96 * 5, '0'), 96);
  const auto t = train_esn(EsnConfig{}, s);
  for (auto mode : {Feedback::kObserved, Feedback::kFreeRunning}) {
    const auto pred = predict_sequence(t, s, mode);
    for (auto b : pred.bits) EXPECT_EQ(b, 0);
  }
}

TEST(Predict, PeriodTwoContinuation) {
  std::string text;
  for (int k = 0; k < 49 * 48; ++k) text += "01";
  const auto [train_s, test_s] = split_train_test(BinarySeries::from_string(text, 96), 45);
  const auto t = train_esn(EsnConfig{}, train_s);
  const auto pred = predict_sequence(t, test_s);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test_s.size(); ++i) hits += pred.bits[i] == test_s.bits()[i];
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(test_s.size()), 0.99);
  // Past the washout every prediction alternates.
  for (std::size_t i = 21; i < 96; ++i) EXPECT_NE(pred.bits[i], pred.bits[i - 1]);
}

TEST(Predict, ProbabilitiesInUnitInterval) {
  const auto s = generate(make_four_state(), 10, 96, 3);
  const auto t = train_esn(EsnConfig{}, s);
  for (auto mode : {Feedback::kObserved, Feedback::kFreeRunning}) {
    const auto pred = predict_sequence(t, s, mode);
    ASSERT_EQ(pred.probabilities.size(), s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      EXPECT_GE(pred.probabilities[i], 0.0);
      EXPECT_LE(pred.probabilities[i], 1.0);
      EXPECT_EQ(pred.bits[i], pred.probabilities[i] > 0.5 ? 1 : 0);
    }
  }
}

TEST(Predict, UntrainedModelIsAStateError) {
  const auto m = build(small_config(8, 2));
  EXPECT_THROW(predict_sequence(m, BinarySeries::from_string("0101", 4)), StateError);
  EXPECT_THROW(m.output(Eigen::VectorXd::Zero(2)), StateError);
}

TEST(Predict, NegatedReadoutComplementsStrictPredictions) {
  const auto s = generate(make_bursting(0.9, 0.8), 10, 96, 4);
  const auto t = train_esn(EsnConfig{}, s);
  auto neg = t;
  *neg.W_out = -*t.W_out;
  const auto a = predict_sequence(t, s, Feedback::kObserved);
  const auto b = predict_sequence(neg, s, Feedback::kObserved);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(a.probabilities[i] + b.probabilities[i], 1.0, 1e-12);
    if (a.probabilities[i] != 0.5) { EXPECT_NE(a.bits[i], b.bits[i]); }
  }
}

TEST(Predict, ResetsAtDayBoundaries) {
  const auto s = generate(make_bursting(0.9, 0.8), 6, 96, 5);
  const auto t = train_esn(EsnConfig{}, s);
  const auto whole = predict_sequence(t, s);
  const auto tail = predict_sequence(t, day_range(s, 3, 3));
  // Day 0 of the tail has no earlier bins to fill its input window.
  for (std::size_t i = 96; i < 3 * 96; ++i) EXPECT_EQ(tail.probabilities[i], whole.probabilities[3 * 96 + i]);
}

TEST(Predict, Deterministic) {
  const auto s = generate(make_three_state(), 10, 96, 6);
  auto c = EsnConfig{};
  c.seed = 42;
  const auto a = train_esn(c, s);
  const auto b = train_esn(c, s);
  EXPECT_EQ(*a.W_out, *b.W_out);
  EXPECT_EQ(predict_sequence(a, s).probabilities, predict_sequence(b, s).probabilities);
}

TEST(ModelJson, RoundTripIsBitExact) {
  const auto s = generate(make_three_state(), 10, 96, 7);
  auto c = EsnConfig{};
  c.seed = 5;
  const auto t = train_esn(c, s);
  std::stringstream buf;
  save_model(buf, t);
  const auto back = load_echo_state_model(buf);
  EXPECT_EQ(back.W, t.W);
  EXPECT_EQ(back.W_in, t.W_in);
  EXPECT_EQ(back.W_fb, t.W_fb);
  EXPECT_EQ(*back.W_out, *t.W_out);
  EXPECT_EQ(back.config.seed, 5u);
  EXPECT_EQ(predict_sequence(back, s).probabilities, predict_sequence(t, s).probabilities);
}

TEST(ModelJson, UntrainedAndMalformed) {
  const auto m = build(small_config(4, 2));
  const auto back = echo_state_model_from_json(to_json(m));
  EXPECT_FALSE(back.trained());
  std::istringstream junk("[1,2");
  EXPECT_THROW(load_echo_state_model(junk), DataError);
  auto j = to_json(m);
  j["W"]["data"].erase(0);
  EXPECT_THROW(echo_state_model_from_json(j), DataError);
}

TEST(FeedbackMode, Names) {
  EXPECT_EQ(feedback_from_string("observed"), Feedback::kObserved);
  EXPECT_EQ(feedback_from_string("free-running"), Feedback::kFreeRunning);
  EXPECT_EQ(to_string(Feedback::kFreeRunning), "free-running");
  EXPECT_THROW(feedback_from_string("teacher"), ConfigError);
}
