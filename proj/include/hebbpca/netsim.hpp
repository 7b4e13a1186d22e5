#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "hebbpca/encoding.hpp"
#include "hebbpca/learners.hpp"
#include "hebbpca/rng.hpp"
#include "hebbpca/types.hpp"

// Round-based simulation of a feedforward node network. Each node owns one
// weight vector. A round has three phases:
//   1. every live node computes y = X w and broadcasts it downstream,
//   2. the channel drops or perturbs each message, in (sender, receiver)
//      order, from its own seeded stream,
//   3. every live node updates from what it received.
// A node's learner only ever sees a LocalView: its own weights, the input
// batch and the upstream signals that actually arrived.

namespace hebbpca {

struct Topology {
  std::vector<std::vector<NodeId>> upstream;  // upstream[i] holds node ids < i

  static Topology feedforward(std::size_t nodes) {
    Topology t;
    t.upstream.resize(nodes);
    for (NodeId i = 0; i < nodes; ++i)
      for (NodeId j = 0; j < i; ++j) t.upstream[i].push_back(j);
    return t;
  }

  std::size_t nodes() const { return upstream.size(); }

  bool feeds(NodeId sender, NodeId receiver) const {
    const auto& up = upstream[receiver];
    return std::find(up.begin(), up.end(), sender) != up.end();
  }

  void validate() const {
    for (NodeId i = 0; i < upstream.size(); ++i)
      for (NodeId j : upstream[i])
        if (j >= i) throw Error(ErrorCode::InvalidConfig, "topology edges must point downstream");
  }
};

struct ChannelModel {
  double drop_probability = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(drop_probability >= 0.0 && drop_probability <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "drop probability must lie in [0, 1]");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sigma must be >= 0");
  }

  bool perfect() const { return drop_probability == 0.0 && noise_sigma == 0.0; }
};

enum class FailureAction { Kill, Revive };

struct FailureEvent {
  std::size_t round = 1;  // one-based; applied before phase 1 of that round
  NodeId node = 0;
  FailureAction action = FailureAction::Kill;
};

struct FailureScript {
  std::vector<FailureEvent> events;

  /// Rounds within [1, horizon], known nodes, and per node an alternating
  /// kill/revive sequence in round order starting with kill.
  void validate(std::size_t horizon, std::size_t nodes) const {
    std::vector<std::vector<FailureEvent>> per_node(nodes);
    for (const auto& e : events) {
      if (e.round < 1 || e.round > horizon)
        throw Error(ErrorCode::InvalidConfig, "failure event outside the simulation horizon");
      if (e.node >= nodes) throw Error(ErrorCode::UnknownNode, "failure event for unknown node");
      per_node[e.node].push_back(e);
    }
    for (auto& list : per_node) {
      std::stable_sort(list.begin(), list.end(),
                       [](const auto& a, const auto& b) { return a.round < b.round; });
      bool alive = true;
      for (const auto& e : list) {
        if ((e.action == FailureAction::Kill) != alive)
          throw Error(ErrorCode::InvalidConfig, "kill/revive events out of order for a node");
        alive = !alive;
      }
    }
  }
};

struct SimRecord {
  std::size_t round = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::vector<NodeId> live;
  std::vector<double> delta_norms;  // one per node, zero when dead
  double max_delta_norm = 0.0;
  double reconstruction_error = 0.0;
};

struct SimTrace {
  std::vector<SimRecord> records;
};

/// Everything a node may observe when it updates.
struct LocalView {
  NodeId self;
  const Vector& own_weights;
  const DataMatrix& batch;
  std::span<const SignalBatch> upstream;
  double eta;
};

struct NodeUpdate {
  Vector weights;
  std::size_t skipped_terms = 0;
};

template <class L>
concept NodeLearner = requires(L& learner, const LocalView& view) {
  { learner.update(view) } -> std::same_as<NodeUpdate>;
};

/// The Simple Hebbian PCA rule as a node learner.
struct ShpLearner {
  Tolerances tol{};

  NodeUpdate update(const LocalView& view) const {
    ShpStepResult r = shp_step(view.self, view.own_weights, view.batch, view.eta, view.upstream, tol);
    return {std::move(r.weights), r.skipped_terms};
  }
};

/// Node weights and liveness plus the channel stream. Owned by the
/// simulator between rounds.
class SimState {
 public:
  SimState(const WeightBasis& initial, std::uint64_t channel_seed)
      : channel_(channel_seed) {
    for (std::size_t i = 0; i < initial.nodes(); ++i) nodes_.push_back({initial.row(i), true});
  }

  /// Starting weights drawn exactly as shp_train draws them.
  static SimState seeded(std::size_t nodes, std::size_t dims, std::uint64_t seed,
                         std::uint64_t channel_seed) {
    return SimState(random_unit_rows(seed, nodes, dims), channel_seed);
  }

  std::size_t nodes() const { return nodes_.size(); }
  std::size_t rounds_completed() const { return round_; }
  bool alive(NodeId i) const { return nodes_.at(i).alive; }

  std::vector<NodeId> live_nodes() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].alive) out.push_back(i);
    return out;
  }

  /// Rows of the live nodes, in node order. Zero rows if all are dead.
  Matrix live_rows() const {
    const auto live = live_nodes();
    const Eigen::Index dims = nodes_.empty() ? 0 : nodes_.front().weights.size();
    Matrix m(static_cast<Eigen::Index>(live.size()), dims);
    for (std::size_t r = 0; r < live.size(); ++r)
      m.row(static_cast<Eigen::Index>(r)) = nodes_[live[r]].weights.transpose();
    return m;
  }

  /// Every node's weights, dead or alive.
  WeightBasis all_weights() const {
    std::vector<Vector> rows;
    for (const auto& n : nodes_) rows.push_back(n.weights);
    return WeightBasis::from_rows(rows);
  }

 private:
  struct Node {
    Vector weights;
    bool alive = true;
  };

  template <NodeLearner L>
  friend SimRecord run_round(SimState&, const DataMatrix&, const Topology&, const ChannelModel&,
                             const FailureScript&, double, L&);

  std::vector<Node> nodes_;
  NormalStream channel_;
  std::size_t round_ = 0;
};

template <NodeLearner L>
SimRecord run_round(SimState& state, const DataMatrix& batch, const Topology& topology,
                    const ChannelModel& channel, const FailureScript& failures, double eta,
                    L& learner) {
  const std::size_t n = state.nodes_.size();
  SimRecord record;
  record.round = ++state.round_;

  for (const auto& e : failures.events) {
    if (e.round != record.round) continue;
    if (e.node >= n) throw Error(ErrorCode::UnknownNode, "failure event for unknown node");
    state.nodes_[e.node].alive = e.action == FailureAction::Revive;
  }

  std::vector<std::optional<SignalBatch>> outgoing(n);
  for (NodeId i = 0; i < n; ++i)
    if (state.nodes_[i].alive) outgoing[i] = emit_signal(i, state.nodes_[i].weights, batch);

  std::vector<std::vector<SignalBatch>> inbox(n);
  for (NodeId sender = 0; sender < n; ++sender) {
    if (!outgoing[sender]) continue;
    for (NodeId receiver = sender + 1; receiver < n; ++receiver) {
      if (!state.nodes_[receiver].alive || !topology.feeds(sender, receiver)) continue;
      if (state.channel_.uniform() < channel.drop_probability) {
        ++record.dropped;
        continue;
      }
      ++record.delivered;
      SignalBatch message = *outgoing[sender];
      if (channel.noise_sigma > 0.0) {
        for (Eigen::Index s = 0; s < message.values.size(); ++s)
          message.values(s) += channel.noise_sigma * state.channel_.next();
      }
      inbox[receiver].push_back(std::move(message));
    }
  }

  record.delta_norms.assign(n, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    auto& node = state.nodes_[i];
    if (!node.alive) continue;
    const LocalView view{i, node.weights, batch, inbox[i], eta};
    NodeUpdate update = learner.update(view);
    record.delta_norms[i] = (update.weights - node.weights).norm();
    record.max_delta_norm = std::max(record.max_delta_norm, record.delta_norms[i]);
    node.weights = std::move(update.weights);
  }

  record.live = state.live_nodes();
  record.reconstruction_error = linear_code_error(state.live_rows(), batch);
  return record;
}

struct SimResult {
  WeightBasis basis;          // live rows at the end, in node order
  std::vector<NodeId> live;
  WeightBasis all_weights;    // every node, including dead ones
  SimTrace trace;
};

/// Runs config.epochs rounds over the full batch. Starting weights come
/// from config.seed, the channel from channel.seed.
template <NodeLearner L = ShpLearner>
SimResult simulate(const DataMatrix& data, const Topology& topology, const ChannelModel& channel,
                   const FailureScript& failures, const TrainConfig& config, L learner = L{},
                   const Tolerances& tol = default_tolerances()) {
  config.validate();
  channel.validate();
  topology.validate();
  if (topology.nodes() != config.nodes)
    throw Error(ErrorCode::InvalidConfig, "topology and config disagree on node count");
  if (config.nodes > data.dims())
    throw Error(ErrorCode::InvalidConfig, "more nodes than input dimensions");
  failures.validate(config.epochs, config.nodes);
  detail::require_trainable(data, tol);

  SimState state = SimState::seeded(config.nodes, data.dims(), config.seed, channel.seed);
  SimTrace trace;
  trace.records.reserve(config.epochs);
  for (std::size_t t = 0; t < config.epochs; ++t) {
    trace.records.push_back(
        run_round(state, data, topology, channel, failures, config.eta_at(t), learner));
  }
  const auto live = state.live_nodes();
  const Matrix rows = state.live_rows();
  return {live.empty() ? WeightBasis(Matrix(0, static_cast<Eigen::Index>(data.dims())))
                       : WeightBasis(rows),
          live, state.all_weights(), std::move(trace)};
}

/// Reconstruction error when the listed components are lost: variance
/// outside the span plus the variances of the lost rows.
inline double evaluate_under_failure(const WeightBasis& basis, const CovarianceMatrix& c,
                                     std::span<const NodeId> lost) {
  if (basis.dims() != c.dims())
    throw Error(ErrorCode::DimensionMismatch, "basis and covariance differ in dims");
  const std::set<NodeId> unique(lost.begin(), lost.end());
  for (NodeId i : unique)
    if (i >= basis.nodes()) throw Error(ErrorCode::UnknownNode, "lost node is not in the basis");
  double error = c.trace();
  for (std::size_t i = 0; i < basis.nodes(); ++i) {
    if (!unique.contains(i)) error -= captured_variance(basis.row(i), c);
  }
  return error;
}

}  // namespace hebbpca
