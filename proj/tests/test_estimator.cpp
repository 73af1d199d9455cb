#include "rocl/estimator.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <vector>

#include "oracles.hpp"
#include "rocl/errors.hpp"
#include "rocl/kinematics.hpp"
#include "rocl/noise.hpp"

namespace rocl {
namespace {

constexpr double kDt = 0.05;

MotionMeasurement sample(int id, double t, double v, double omega) {
  MotionMeasurement m;
  m.vehicle_id = id;
  m.timestamp = t;
  m.linear_velocity = v;
  m.turn_rate = omega;
  return m;
}

RangeMeasurement range_sample(int a, int b, double d, double t) {
  RangeMeasurement r;
  r.id_a = a;
  r.id_b = b;
  r.distance = d;
  r.timestamp = t;
  return r;
}

FleetBelief two_vehicle_belief() {
  FleetBelief b;
  b.dynamic_ids = {3, 4};
  b.nominal = {VehicleState(1.0, 2.0, 0.3), VehicleState(4.0, -1.0, -0.8)};
  b.covariance = Eigen::MatrixXd::Identity(6, 6) * 0.2;
  b.static_anchors = {{1, Eigen::Vector2d(0.0, 0.0)}, {2, Eigen::Vector2d(8.0, 0.0)}};
  b.last_update_time = 0.0;
  return b;
}

ProcessNoiseSpec noise_for(const FleetBelief& b) {
  ProcessNoiseSpec spec;
  spec.dt = kDt;
  for (int id : b.dynamic_ids) {
    spec.per_vehicle[id] = NoiseSpec{0.2, 0.1, 0.1};
  }
  return spec;
}

TEST(PropagationJacobian, MatchesFiniteDifferenceOfMidpointStep) {
  NoiseStream rng(41u);
  for (int trial = 0; trial < 30; ++trial) {
    const VehicleState x0(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0),
                          rng.uniform(-2.0, 2.0));
    const double v0 = rng.uniform(-1.0, 1.0);
    const double v1 = rng.uniform(-1.0, 1.0);
    const double w0 = rng.uniform(-1.0, 1.0);
    const double w1 = rng.uniform(-1.0, 1.0);
    const auto u0 = sample(9, 0.0, v0, w0);
    const auto u1 = sample(9, kDt, v1, w1);

    const double v_mid = 0.5 * (v0 + v1);
    const double w_mid = 0.5 * (w0 + w1);
    const Eigen::Matrix3d jac =
        propagation_jacobian(v_mid, x0.heading + 0.5 * w_mid * kDt, kDt);

    const double h = 1e-6;
    Eigen::Matrix3d fd;
    for (int col = 0; col < 3; ++col) {
      Eigen::Vector3d delta = Eigen::Vector3d::Zero();
      delta(col) = h;
      const VehicleState hi(x0.position.x() + delta(0), x0.position.y() + delta(1),
                            x0.heading + delta(2));
      const VehicleState lo(x0.position.x() - delta(0), x0.position.y() - delta(1),
                            x0.heading - delta(2));
      const VehicleState fhi = propagate_midpoint(hi, u0, u1);
      const VehicleState flo = propagate_midpoint(lo, u0, u1);
      fd(0, col) = (fhi.position.x() - flo.position.x()) / (2.0 * h);
      fd(1, col) = (fhi.position.y() - flo.position.y()) / (2.0 * h);
      fd(2, col) = wrap_angle(fhi.heading - flo.heading) / (2.0 * h);
    }
    EXPECT_LT((jac - fd).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
  }
}

TEST(PropagationNoise, ProjectsTranslationNoiseAlongHeading) {
  const NoiseSpec noise{0.2, 0.1, 0.1};
  const double v_var = 0.2 * 0.2 * kDt * kDt;
  const double w_var = 0.1 * 0.1 * kDt * kDt;

  const Eigen::Matrix3d straight = propagation_noise(0.0, noise, kDt);
  EXPECT_NEAR(straight(0, 0), v_var, 1e-15);
  EXPECT_NEAR(straight(1, 1), 0.0, 1e-15);
  EXPECT_NEAR(straight(2, 2), w_var, 1e-15);

  const Eigen::Matrix3d sideways = propagation_noise(kPi / 2.0, noise, kDt);
  EXPECT_NEAR(sideways(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(sideways(1, 1), v_var, 1e-15);

  const Eigen::Matrix3d tilted = propagation_noise(0.6, noise, kDt);
  EXPECT_NEAR(tilted(0, 0) + tilted(1, 1), v_var, 1e-15);
  EXPECT_NEAR(tilted(0, 0), std::cos(0.6) * std::cos(0.6) * v_var, 1e-15);
  EXPECT_EQ(tilted(0, 1), 0.0);
}

TEST(Propagate, AdvancesEveryNominalWithTheMidpointStep) {
  const FleetBelief belief = two_vehicle_belief();
  const ProcessNoiseSpec noise = noise_for(belief);

  std::map<int, MotionPair> motions;
  motions[3] = {sample(3, 0.0, 0.4, 0.1), sample(3, kDt, 0.5, 0.2)};
  motions[4] = {sample(4, 0.0, -0.2, 0.6), sample(4, kDt, -0.1, 0.4)};

  const FleetBelief out = propagate(belief, motions, noise);
  for (int i = 0; i < 2; ++i) {
    const int id = belief.dynamic_ids[i];
    const VehicleState expected =
        propagate_midpoint(belief.nominal[i], motions.at(id).first, motions.at(id).second);
    EXPECT_NEAR(out.nominal[i].position.x(), expected.position.x(), 1e-15);
    EXPECT_NEAR(out.nominal[i].position.y(), expected.position.y(), 1e-15);
    EXPECT_NEAR(out.nominal[i].heading, expected.heading, 1e-15);
  }
  EXPECT_NEAR(out.last_update_time, kDt, 1e-15);
  EXPECT_LT((out.covariance - out.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(out.covariance.trace(), belief.covariance.trace());
}

TEST(Propagate, RejectsMissingOrMisspacedSamples) {
  const FleetBelief belief = two_vehicle_belief();
  const ProcessNoiseSpec noise = noise_for(belief);

  std::map<int, MotionPair> missing;
  missing[3] = {sample(3, 0.0, 0.4, 0.1), sample(3, kDt, 0.5, 0.2)};
  EXPECT_THROW(propagate(belief, missing, noise), StaleInputError);

  std::map<int, MotionPair> misspaced;
  misspaced[3] = {sample(3, 0.0, 0.4, 0.1), sample(3, 2.0 * kDt, 0.5, 0.2)};
  misspaced[4] = {sample(4, 0.0, -0.2, 0.6), sample(4, kDt, -0.1, 0.4)};
  EXPECT_THROW(propagate(belief, misspaced, noise), std::invalid_argument);

  ProcessNoiseSpec incomplete = noise;
  incomplete.per_vehicle.erase(4);
  std::map<int, MotionPair> motions;
  motions[3] = {sample(3, 0.0, 0.4, 0.1), sample(3, kDt, 0.5, 0.2)};
  motions[4] = {sample(4, 0.0, -0.2, 0.6), sample(4, kDt, -0.1, 0.4)};
  EXPECT_THROW(propagate(belief, motions, incomplete), std::invalid_argument);

  FleetBelief empty;
  EXPECT_THROW(propagate(empty, motions, noise), std::invalid_argument);
}

TEST(SmoothingQueue, UnitDecayAveragesUniformlyOverTheWindow) {
  SmoothingQueue q(3, 1.0);
  EXPECT_NEAR(q.push(range_sample(1, 2, 1.0, 0.00)).distance, 1.0, 1e-15);
  EXPECT_NEAR(q.push(range_sample(1, 2, 2.0, 0.01)).distance, 1.5, 1e-15);
  EXPECT_NEAR(q.push(range_sample(1, 2, 3.0, 0.02)).distance, 2.0, 1e-15);
  EXPECT_NEAR(q.push(range_sample(1, 2, 4.0, 0.03)).distance, 3.0, 1e-15);
  EXPECT_EQ(q.size(), 3);
}

TEST(SmoothingQueue, ExponentialWeightsFavorTheNewestSample) {
  SmoothingQueue q(2, 0.5);
  q.push(range_sample(1, 2, 1.0, 0.00));
  const RangeMeasurement smoothed = q.push(range_sample(1, 2, 2.0, 0.01));
  EXPECT_NEAR(smoothed.distance, (1.0 * 2.0 + 0.5 * 1.0) / 1.5, 1e-15);
  EXPECT_NEAR(smoothed.timestamp, 0.01, 1e-15);
  EXPECT_EQ(smoothed.id_a, 1);
  EXPECT_EQ(smoothed.id_b, 2);
}

TEST(SmoothingQueue, VarianceFactorMatchesGeometricSums) {
  EXPECT_NEAR(SmoothingQueue::variance_factor(1, 0.3), 1.0, 1e-15);
  EXPECT_NEAR(SmoothingQueue::variance_factor(4, 1.0), 0.25, 1e-15);

  const int window = 5;
  const double decay = 0.7;
  const double sum = (1.0 - std::pow(decay, window)) / (1.0 - decay);
  const double sum_sq = (1.0 - std::pow(decay * decay, window)) / (1.0 - decay * decay);
  EXPECT_NEAR(SmoothingQueue::variance_factor(window, decay), sum_sq / (sum * sum), 1e-15);
}

TEST(SmoothingQueue, RejectsInvalidWindowOrDecay) {
  EXPECT_THROW(SmoothingQueue(0, 0.5), std::invalid_argument);
  EXPECT_THROW(SmoothingQueue(3, 0.0), std::invalid_argument);
  EXPECT_THROW(SmoothingQueue(3, 1.5), std::invalid_argument);
  EXPECT_THROW(SmoothingQueue::variance_factor(0, 0.5), std::invalid_argument);
  EXPECT_THROW(SmoothingQueue::variance_factor(3, -0.1), std::invalid_argument);
}

TEST(RangeJacobianRow, MatchesFiniteDifferenceForMovingPair) {
  const FleetBelief belief = two_vehicle_belief();
  const Eigen::RowVectorXd row = range_jacobian_row(belief, 3, 4);

  const auto range_of = [&](const Eigen::VectorXd& errors) {
    const Eigen::Vector2d pa = belief.nominal[0].position + errors.segment<2>(0);
    const Eigen::Vector2d pb = belief.nominal[1].position + errors.segment<2>(3);
    return (pa - pb).norm();
  };
  const Eigen::RowVectorXd fd =
      oracles::central_difference_gradient(range_of, Eigen::VectorXd::Zero(6));
  EXPECT_LT((row - fd).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(row(2), 0.0);
  EXPECT_EQ(row(5), 0.0);
}

TEST(RangeJacobianRow, AnchorEndpointContributesNoColumns) {
  const FleetBelief belief = two_vehicle_belief();
  const Eigen::RowVectorXd row = range_jacobian_row(belief, 3, 1);
  EXPECT_EQ(row.segment<3>(3).cwiseAbs().maxCoeff(), 0.0);
  const Eigen::Vector2d unit =
      (belief.nominal[0].position - belief.static_anchors.at(1)).normalized();
  EXPECT_NEAR(row(0), unit.x(), 1e-15);
  EXPECT_NEAR(row(1), unit.y(), 1e-15);
}

TEST(RangeJacobianRow, RejectsUnusableEndpoints) {
  FleetBelief belief = two_vehicle_belief();
  EXPECT_THROW(range_jacobian_row(belief, 1, 2), std::invalid_argument);
  EXPECT_THROW(range_jacobian_row(belief, 3, 99), std::invalid_argument);

  belief.nominal[1] = belief.nominal[0];
  EXPECT_THROW(range_jacobian_row(belief, 3, 4), DegenerateConfigError);
}

double true_distance(const FleetBelief& b, int id_a, int id_b) {
  const auto pos = [&](int id) -> Eigen::Vector2d {
    const int idx = b.index_of(id);
    if (idx >= 0) return b.nominal[idx].position;
    return b.static_anchors.at(id);
  };
  return (pos(id_a) - pos(id_b)).norm();
}

TEST(Update, ConsistentRangesLeaveTheNominalInPlace) {
  const FleetBelief belief = two_vehicle_belief();
  const std::vector<std::pair<int, int>> pairs{{3, 4}, {3, 1}, {3, 2}, {4, 1}, {4, 2}};
  std::vector<RangeMeasurement> ranges;
  for (auto [a, b] : pairs) {
    ranges.push_back(range_sample(a, b, true_distance(belief, a, b), 0.0));
  }

  UpdateStats stats;
  const FleetBelief out = update(belief, ranges, 0.1, 6.0, &stats);
  EXPECT_EQ(stats.rows_used, 5);
  EXPECT_EQ(stats.rows_gated, 0);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LT((out.nominal[i].position - belief.nominal[i].position).norm(), 1e-10);
    EXPECT_NEAR(out.nominal[i].heading, belief.nominal[i].heading, 1e-10);
  }
  EXPECT_LT(out.covariance.trace(), belief.covariance.trace());
}

TEST(Update, PullsThePairApartWhenTheRangeReadsLong) {
  const FleetBelief belief = two_vehicle_belief();
  const double d = true_distance(belief, 3, 4);
  const FleetBelief out =
      update(belief, {range_sample(3, 4, d + 0.5, 0.0)}, 0.1, 6.0, nullptr);
  const double d_after = (out.nominal[0].position - out.nominal[1].position).norm();
  EXPECT_GT(d_after, d);
  EXPECT_LT(d_after, d + 0.5);
}

TEST(Update, GateDropsWildOutliersAndKeepsTheRest) {
  const FleetBelief belief = two_vehicle_belief();
  std::vector<RangeMeasurement> ranges{
      range_sample(3, 4, true_distance(belief, 3, 4), 0.0),
      range_sample(3, 1, true_distance(belief, 3, 1) + 50.0, 0.0),
  };
  UpdateStats stats;
  const FleetBelief out = update(belief, ranges, 0.1, 6.0, &stats);
  EXPECT_EQ(stats.rows_gated, 1);
  EXPECT_EQ(stats.rows_used, 1);
  EXPECT_LT((out.nominal[0].position - belief.nominal[0].position).norm(), 0.1);
}

TEST(Update, AnchorToAnchorRangesAreIgnored) {
  const FleetBelief belief = two_vehicle_belief();
  UpdateStats stats;
  const FleetBelief out =
      update(belief, {range_sample(1, 2, 8.0, 0.0)}, 0.1, 6.0, &stats);
  EXPECT_EQ(stats.rows_used, 0);
  EXPECT_LT((out.covariance - belief.covariance).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Update, CoincidentPredictionCountsAsDegenerate) {
  FleetBelief belief = two_vehicle_belief();
  belief.nominal[1] = belief.nominal[0];
  UpdateStats stats;
  const FleetBelief out =
      update(belief, {range_sample(3, 4, 1.0, 0.0)}, 0.1, 6.0, &stats);
  EXPECT_EQ(stats.rows_degenerate, 1);
  EXPECT_EQ(stats.rows_used, 0);
  EXPECT_LT((out.covariance - belief.covariance).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Update, JosephFormKeepsTheCovarianceSymmetricPositive) {
  FleetBelief belief = two_vehicle_belief();
  belief.covariance(0, 3) = belief.covariance(3, 0) = 0.05;
  std::vector<RangeMeasurement> ranges{
      range_sample(3, 4, true_distance(belief, 3, 4) + 0.2, 0.0),
      range_sample(3, 1, true_distance(belief, 3, 1) - 0.1, 0.0),
      range_sample(4, 2, true_distance(belief, 4, 2) + 0.1, 0.0),
  };
  const FleetBelief out = update(belief, ranges, 0.05, 6.0, nullptr);
  EXPECT_EQ((out.covariance - out.covariance.transpose()).cwiseAbs().maxCoeff(), 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.covariance);
  EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-12);
}

TEST(Update, ZeroSigmaFallsBackToTheVarianceFloor) {
  const FleetBelief belief = two_vehicle_belief();
  const FleetBelief out = update(
      belief, {range_sample(3, 4, true_distance(belief, 3, 4), 0.0)}, 0.0, 6.0, nullptr);
  EXPECT_TRUE(out.covariance.allFinite());
}

TEST(Step, EqualsPropagateFollowedByUpdate) {
  const FleetBelief belief = two_vehicle_belief();
  const ProcessNoiseSpec noise = noise_for(belief);
  std::map<int, MotionPair> motions;
  motions[3] = {sample(3, 0.0, 0.4, 0.1), sample(3, kDt, 0.5, 0.2)};
  motions[4] = {sample(4, 0.0, -0.2, 0.6), sample(4, kDt, -0.1, 0.4)};

  const FleetBelief predicted = propagate(belief, motions, noise);
  std::vector<RangeMeasurement> ranges{
      range_sample(3, 4, true_distance(predicted, 3, 4) + 0.05, kDt)};

  const FleetBelief via_step = step(belief, motions, ranges, noise, 0.1);
  const FleetBelief via_pieces = update(predicted, ranges, 0.1);
  EXPECT_LT((via_step.covariance - via_pieces.covariance).cwiseAbs().maxCoeff(), 1e-15);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(via_step.nominal[i].position.x(), via_pieces.nominal[i].position.x(), 1e-15);
    EXPECT_NEAR(via_step.nominal[i].heading, via_pieces.nominal[i].heading, 1e-15);
  }
}

TEST(Step, RejectsStaleMotionAndFutureRanges) {
  FleetBelief belief = two_vehicle_belief();
  belief.last_update_time = 1.0;
  const ProcessNoiseSpec noise = noise_for(belief);

  std::map<int, MotionPair> stale;
  stale[3] = {sample(3, 0.95, 0.4, 0.1), sample(3, 1.0, 0.5, 0.2)};
  stale[4] = {sample(4, 0.95, -0.2, 0.6), sample(4, 1.0, -0.1, 0.4)};
  EXPECT_THROW(step(belief, stale, {}, noise, 0.1), std::invalid_argument);

  std::map<int, MotionPair> fresh;
  fresh[3] = {sample(3, 1.0, 0.4, 0.1), sample(3, 1.0 + kDt, 0.5, 0.2)};
  fresh[4] = {sample(4, 1.0, -0.2, 0.6), sample(4, 1.0 + kDt, -0.1, 0.4)};
  EXPECT_THROW(
      step(belief, fresh, {range_sample(3, 4, 3.0, 2.0)}, noise, 0.1),
      std::invalid_argument);
}

TEST(Estimation, TwoAnchorsPullAPerturbedVehicleBackToTruth) {
  FleetBelief belief;
  belief.dynamic_ids = {5};
  VehicleState truth(2.0, 3.0, 0.3);
  belief.nominal = {VehicleState(2.4, 2.7, 0.5)};
  belief.covariance = Eigen::Vector3d(0.25, 0.25, 0.1).asDiagonal();
  belief.static_anchors = {{1, Eigen::Vector2d(0.0, 0.0)}, {2, Eigen::Vector2d(8.0, 0.0)}};

  ProcessNoiseSpec noise;
  noise.dt = kDt;
  noise.per_vehicle[5] = NoiseSpec{0.05, 0.05, 0.01};

  const double v = 0.3, w = 0.2;
  for (int k = 0; k < 400; ++k) {
    const double t0 = k * kDt;
    truth = propagate_exact(truth, v, w, kDt);
    std::map<int, MotionPair> motions;
    motions[5] = {sample(5, t0, v, w), sample(5, t0 + kDt, v, w)};
    std::vector<RangeMeasurement> ranges{
        range_sample(5, 1, (truth.position - belief.static_anchors.at(1)).norm(), t0 + kDt),
        range_sample(5, 2, (truth.position - belief.static_anchors.at(2)).norm(), t0 + kDt),
    };
    belief = step(belief, motions, ranges, noise, 0.01);
  }

  EXPECT_LT((belief.nominal[0].position - truth.position).norm(), 0.02);
  EXPECT_LT(std::abs(wrap_angle(belief.nominal[0].heading - truth.heading)), 0.02);
}

TEST(FleetEstimatorDriver, FirstTickLatchesAndHeldOdometryIsCovered) {
  FleetBelief initial;
  initial.dynamic_ids = {5};
  initial.nominal = {VehicleState(2.0, 3.0, 0.3)};
  initial.covariance = Eigen::MatrixXd::Identity(3, 3) * 0.01;
  initial.static_anchors = {{1, Eigen::Vector2d(0.0, 0.0)}, {2, Eigen::Vector2d(8.0, 0.0)}};

  ProcessNoiseSpec noise;
  noise.dt = kDt;
  noise.per_vehicle[5] = NoiseSpec{0.2, 0.1, 0.1};

  FleetEstimator driver(initial, noise, EstimatorConfig{});
  driver.tick({sample(5, 0.0, 0.4, 0.0)}, 0.0);
  EXPECT_EQ(driver.counters().ticks, 0);  // priming tick
  EXPECT_NEAR(driver.belief().last_update_time, 0.0, 1e-15);

  driver.tick({sample(5, kDt, 0.4, 0.0)}, kDt);
  EXPECT_EQ(driver.counters().ticks, 1);
  EXPECT_NEAR(driver.belief().last_update_time, kDt, 1e-12);
  EXPECT_GT(driver.belief().nominal[0].position.x(), 2.0);

  driver.tick({}, 2 * kDt);  // dropped sample: zero-order hold keeps the belief moving
  EXPECT_EQ(driver.counters().held_ticks, 1);
  EXPECT_NEAR(driver.belief().last_update_time, 2 * kDt, 1e-12);
}

}  // namespace
}  // namespace rocl
