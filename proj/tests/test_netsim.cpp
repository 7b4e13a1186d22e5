#include <cmath>
#include <random>
#include <sstream>
#include <type_traits>

#include <gtest/gtest.h>

#include "hebbpca/balanced.hpp"
#include "hebbpca/datagen.hpp"
#include "hebbpca/io.hpp"
#include "hebbpca/netsim.hpp"
#include "oracles.hpp"

using namespace hebbpca;

namespace {

TrainConfig config(std::size_t nodes, std::size_t epochs, double eta, std::uint64_t seed = 42) {
  TrainConfig cfg;
  cfg.nodes = nodes;
  cfg.epochs = epochs;
  cfg.eta = eta;
  cfg.tol = 1e-12;
  cfg.seed = seed;
  return cfg;
}

DataMatrix diag_data(const std::vector<double>& lambda) {
  return DataMatrix::assume_centered(oracle::diagonal_data(lambda));
}

std::string trace_text(const SimTrace& t) {
  std::ostringstream out;
  io::write_sim_trace(out, t);
  return out.str();
}

// Copies of everything a node was shown, keyed by round.
struct Observation {
  std::size_t call = 0;
  NodeId self = 0;
  Vector own;
  Matrix batch;
  std::vector<SignalBatch> upstream;
  double eta = 0.0;
};

struct RecordingLearner {
  std::vector<Observation>* log;
  ShpLearner inner{};

  NodeUpdate update(const LocalView& view) {
    log->push_back({log->size(), view.self, view.own_weights, view.batch.values(),
                    {view.upstream.begin(), view.upstream.end()}, view.eta});
    return inner.update(view);
  }
};

// Compile-time shape of what a node can see: exactly five members, none of
// which can reach another node's weights.
template <class T>
constexpr bool has_five_members() {
  return requires(T v) {
    [](T& x) {
      auto& [a, b, c, d, e] = x;
      (void)a, (void)b, (void)c, (void)d, (void)e;
    }(v);
  };
}

}  // namespace

static_assert(NodeLearner<ShpLearner>);
static_assert(NodeLearner<RecordingLearner>);
static_assert(std::is_same_v<decltype(LocalView::own_weights), const Vector&>);
static_assert(std::is_same_v<decltype(LocalView::batch), const DataMatrix&>);
static_assert(std::is_same_v<decltype(LocalView::upstream), std::span<const SignalBatch>>);
static_assert(std::is_same_v<decltype(LocalView::self), NodeId>);
static_assert(std::is_same_v<decltype(LocalView::eta), double>);

TEST(Simulate, PerfectChannelMatchesShpTrainBitwise) {
  const DataMatrix d = gen_data({{8, 4, 2, 1}, 1024, 7});
  TrainConfig cfg = config(4, 3000, 0.0125);
  cfg.tol = 1e-9;
  const auto trained = shp_train(d, cfg);
  cfg.epochs = trained.report.epochs_run;
  const auto sim = simulate(d, Topology::feedforward(4), ChannelModel{}, FailureScript{}, cfg);
  EXPECT_EQ(sim.basis.rows(), trained.basis.rows());
  ASSERT_EQ(sim.trace.records.size(), trained.report.epochs_run);
  for (std::size_t r = 0; r < sim.trace.records.size(); ++r) {
    for (NodeId i = 0; i < 4; ++i)
      EXPECT_EQ(sim.trace.records[r].delta_norms[i], trained.report.trace[r * 4 + i].delta_norm);
  }
}

TEST(RunRound, PerfectChannelEqualsOneShpEpoch) {
  const DataMatrix d = gen_data({{3, 2, 1}, 256, 1});
  const auto one = shp_train(d, config(3, 1, 0.03, 5));
  SimState state = SimState::seeded(3, 3, 5, 99);
  ShpLearner learner;
  const SimRecord rec = run_round(state, d, Topology::feedforward(3), ChannelModel{}, FailureScript{}, 0.03, learner);
  EXPECT_EQ(state.all_weights().rows(), one.basis.rows());
  EXPECT_EQ(rec.delivered, 3u);
  EXPECT_EQ(rec.dropped, 0u);
  EXPECT_EQ(rec.round, 1u);
}

TEST(RunRound, FullDropMakesEveryNodePureOja) {
  const DataMatrix d = gen_data({{3, 2, 1}, 256, 2});
  SimState state = SimState::seeded(3, 3, 8, 1);
  const WeightBasis before = state.all_weights();
  ShpLearner learner;
  ChannelModel channel;
  channel.drop_probability = 1.0;
  const SimRecord rec = run_round(state, d, Topology::feedforward(3), channel, FailureScript{}, 0.03, learner);
  EXPECT_EQ(rec.delivered, 0u);
  EXPECT_EQ(rec.dropped, 3u);
  for (NodeId i = 0; i < 3; ++i) {
    EXPECT_EQ(state.all_weights().row(i), shp_step(0, before.row(i), d, 0.03, {}).weights);
  }
}

TEST(RunRound, KilledNodeStopsSendingAndUpdating) {
  const DataMatrix d = gen_data({{3, 2, 1}, 256, 3});
  std::vector<Observation> log;
  RecordingLearner learner{&log};
  SimState state = SimState::seeded(3, 3, 4, 4);
  FailureScript script;
  script.events.push_back({2, 0, FailureAction::Kill});
  const Topology topo = Topology::feedforward(3);
  run_round(state, d, topo, ChannelModel{}, script, 0.03, learner);
  const Vector frozen = state.all_weights().row(0);
  log.clear();
  const SimRecord rec = run_round(state, d, topo, ChannelModel{}, script, 0.03, learner);
  EXPECT_FALSE(state.alive(0));
  EXPECT_EQ(state.all_weights().row(0), frozen);
  EXPECT_EQ(rec.live, (std::vector<NodeId>{1, 2}));
  EXPECT_EQ(rec.delivered, 1u);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_TRUE(log[0].upstream.empty());  // node 1 (index 1) lost its only upstream
  ASSERT_EQ(log[1].upstream.size(), 1u);
  EXPECT_EQ(log[1].upstream[0].node, 1u);
}

TEST(RunRound, ReviveRestoresNode) {
  const DataMatrix d = gen_data({{3, 2, 1}, 128, 3});
  FailureScript script;
  script.events.push_back({1, 1, FailureAction::Kill});
  script.events.push_back({3, 1, FailureAction::Revive});
  const auto sim = simulate(d, Topology::feedforward(3), ChannelModel{}, script, config(3, 4, 0.03));
  EXPECT_EQ(sim.trace.records[0].live, (std::vector<NodeId>{0, 2}));
  EXPECT_EQ(sim.trace.records[1].live, (std::vector<NodeId>{0, 2}));
  EXPECT_EQ(sim.trace.records[2].live, (std::vector<NodeId>{0, 1, 2}));
}

TEST(Locality, NodesObserveOnlyOwnWeightsBatchAndUpstreamSignals) {
  static_assert(has_five_members<LocalView>());
  const DataMatrix d = gen_data({{4, 2, 1, 0.5}, 128, 9});
  std::vector<Observation> log;
  RecordingLearner learner{&log};
  ChannelModel channel;
  channel.drop_probability = 0.3;
  channel.seed = 17;
  SimState state = SimState::seeded(4, 4, 3, channel.seed);
  const Topology topo = Topology::feedforward(4);
  for (int round = 0; round < 20; ++round) {
    const WeightBasis before = state.all_weights();
    log.clear();
    run_round(state, d, topo, channel, FailureScript{}, 0.02, learner);
    ASSERT_EQ(log.size(), 4u);
    for (const auto& obs : log) {
      EXPECT_EQ(obs.own, before.row(obs.self));
      EXPECT_EQ(obs.batch, d.values());
      EXPECT_EQ(obs.eta, 0.02);
      for (const auto& sig : obs.upstream) {
        EXPECT_LT(sig.node, obs.self);
        EXPECT_EQ(sig.values, d.values() * before.row(sig.node));
      }
      // The update depends on nothing else: replaying the observation
      // through the bare rule reproduces the committed weights.
      EXPECT_EQ(shp_step(obs.self, obs.own, d, obs.eta, obs.upstream).weights,
                state.all_weights().row(obs.self));
    }
  }
}

TEST(Simulate, DeterministicTraces) {
  const DataMatrix d = gen_data({{3, 2, 1}, 256, 5});
  ChannelModel channel{0.2, 0.05, 123};
  FailureScript script;
  script.events.push_back({10, 2, FailureAction::Kill});
  const auto a = simulate(d, Topology::feedforward(3), channel, script, config(3, 50, 0.03));
  const auto b = simulate(d, Topology::feedforward(3), channel, script, config(3, 50, 0.03));
  EXPECT_EQ(trace_text(a.trace), trace_text(b.trace));
  EXPECT_EQ(a.all_weights.rows(), b.all_weights.rows());
  channel.seed = 124;
  const auto c = simulate(d, Topology::feedforward(3), channel, script, config(3, 50, 0.03));
  EXPECT_NE(trace_text(a.trace), trace_text(c.trace));
}

TEST(Simulate, NoiseDoesNotTouchLearnerSeed) {
  const DataMatrix d = gen_data({{3, 2, 1}, 64, 5});
  const auto a = simulate(d, Topology::feedforward(3), ChannelModel{0.0, 0.1, 1}, FailureScript{}, config(3, 1, 0.03));
  const auto b = simulate(d, Topology::feedforward(3), ChannelModel{0.0, 0.1, 2}, FailureScript{}, config(3, 1, 0.03));
  // Node 0 has no upstream, so channel randomness cannot reach it.
  EXPECT_EQ(a.all_weights.row(0), b.all_weights.row(0));
  EXPECT_NE(a.all_weights.row(2), b.all_weights.row(2));
}

TEST(Simulate, ModestDropStillFindsTopComponent) {
  const DataMatrix d = diag_data({2, 0.5});
  ChannelModel channel{0.1, 0.0, 7};
  const auto sim = simulate(d, Topology::feedforward(2), channel, FailureScript{}, config(2, 5000, 0.05));
  EXPECT_GE(std::abs(sim.basis.row(0).dot(Vector::Unit(2, 0))), 0.99);
}

TEST(Simulate, SurvivorsAfterPermanentKillStayWithinWorstCase) {
  const DataMatrix d = gen_data({{4, 2, 1}, 512, 6});
  const CovarianceMatrix c = covariance(d);
  const auto learned = shp_train(d, config(3, 4000, 0.025));
  const WeightBasis clean = orthonormalize(learned.basis.rows());
  const double bound = worst_case_loss(clean, c, 1);
  for (NodeId victim = 0; victim < 3; ++victim) {
    FailureScript script;
    script.events.push_back({2000, victim, FailureAction::Kill});
    const auto sim = simulate(d, Topology::feedforward(3), ChannelModel{}, script, config(3, 4000, 0.025));
    ASSERT_EQ(sim.live.size(), 2u);
    EXPECT_LE(sim.trace.records.back().reconstruction_error, bound + 1e-6);
  }
}

TEST(Simulate, MeanErrorGrowsWithDropRate) {
  const DataMatrix d = gen_data({{4, 2, 1}, 256, 12});
  double previous = -1.0;
  for (double p : {0.0, 0.1, 0.3, 0.5}) {
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto sim = simulate(d, Topology::feedforward(3), ChannelModel{p, 0.0, 1000 + seed},
                                FailureScript{}, config(3, 400, 0.025, seed));
      double avg = 0.0;
      for (const auto& r : sim.trace.records) avg += r.reconstruction_error;
      mean += avg / static_cast<double>(sim.trace.records.size());
    }
    mean /= 10.0;
    EXPECT_GE(mean, previous);
    previous = mean;
  }
}

TEST(Simulate, Validation) {
  const DataMatrix d = gen_data({{3, 2, 1}, 64, 5});
  auto code = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code([&] { simulate(d, Topology::feedforward(3), ChannelModel{1.5, 0, 0}, {}, config(3, 5, 0.1)); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code([&] { simulate(d, Topology::feedforward(2), ChannelModel{}, {}, config(3, 5, 0.1)); }),
            ErrorCode::InvalidConfig);
  FailureScript late;
  late.events.push_back({6, 0, FailureAction::Kill});
  EXPECT_EQ(code([&] { simulate(d, Topology::feedforward(3), ChannelModel{}, late, config(3, 5, 0.1)); }),
            ErrorCode::InvalidConfig);
  FailureScript twice;
  twice.events.push_back({1, 0, FailureAction::Kill});
  twice.events.push_back({2, 0, FailureAction::Kill});
  EXPECT_EQ(code([&] { simulate(d, Topology::feedforward(3), ChannelModel{}, twice, config(3, 5, 0.1)); }),
            ErrorCode::InvalidConfig);
  FailureScript unknown;
  unknown.events.push_back({1, 7, FailureAction::Kill});
  EXPECT_EQ(code([&] { simulate(d, Topology::feedforward(3), ChannelModel{}, unknown, config(3, 5, 0.1)); }),
            ErrorCode::UnknownNode);
  const DataMatrix zero = center(DataMatrix(Matrix::Ones(4, 3)));
  EXPECT_EQ(code([&] { simulate(zero, Topology::feedforward(3), ChannelModel{}, {}, config(3, 5, 0.1)); }),
            ErrorCode::DegenerateData);
  Topology bad = Topology::feedforward(3);
  bad.upstream[0].push_back(2);
  EXPECT_EQ(code([&] { simulate(d, bad, ChannelModel{}, {}, config(3, 5, 0.1)); }), ErrorCode::InvalidConfig);
}

TEST(Simulate, AllNodesDeadYieldsEmptyBasis) {
  const DataMatrix d = gen_data({{3, 2}, 64, 5});
  FailureScript script;
  script.events.push_back({1, 0, FailureAction::Kill});
  script.events.push_back({1, 1, FailureAction::Kill});
  const auto sim = simulate(d, Topology::feedforward(2), ChannelModel{}, script, config(2, 3, 0.1));
  EXPECT_TRUE(sim.live.empty());
  EXPECT_EQ(sim.basis.nodes(), 0u);
  const double total = d.values().rowwise().squaredNorm().mean();
  EXPECT_NEAR(sim.trace.records.back().reconstruction_error, total, 1e-12);
}

TEST(EvaluateUnderFailure, Examples) {
  Matrix c = Matrix::Zero(2, 2);
  c(0, 0) = 3;
  c(1, 1) = 1;
  const CovarianceMatrix cov(c);
  const WeightBasis pca = WeightBasis::identity(2);
  const std::vector<NodeId> first{0};
  const std::vector<NodeId> second{1};
  const std::vector<NodeId> both{0, 1};
  EXPECT_EQ(evaluate_under_failure(pca, cov, {}), 0.0);
  EXPECT_EQ(evaluate_under_failure(pca, cov, both), 4.0);
  EXPECT_EQ(evaluate_under_failure(pca, cov, first), 3.0);
  const WeightBasis balanced = balance(pca, cov).basis;
  EXPECT_NEAR(evaluate_under_failure(balanced, cov, first), 2.0, 1e-15);
  EXPECT_NEAR(evaluate_under_failure(balanced, cov, second), 2.0, 1e-15);
  const std::vector<NodeId> bogus{5};
  try {
    evaluate_under_failure(pca, cov, bogus);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownNode);
  }
}

TEST(EvaluateUnderFailure, NothingLostEqualsResidual) {
  std::mt19937_64 rng(3);
  const DataMatrix d = center(DataMatrix(oracle::gaussian(rng, 90, 5)));
  const WeightBasis b(oracle::random_orthonormal_rows(rng, 3, 5));
  EXPECT_NEAR(evaluate_under_failure(b, covariance(d), {}), variance_decomposition(b, d).residual, 1e-9);
  const std::vector<NodeId> all{0, 1, 2};
  EXPECT_NEAR(evaluate_under_failure(b, covariance(d), all), d.values().rowwise().squaredNorm().mean(), 1e-9);
}
