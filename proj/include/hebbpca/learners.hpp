#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hebbpca/encoding.hpp"
#include "hebbpca/rng.hpp"
#include "hebbpca/spectral.hpp"
#include "hebbpca/types.hpp"

// Hebbian learning rules and full-batch trainers.
//
// Every rule is written against sample means: with y = X w for a batch of m
// samples, (1/m) X^T y = C w. Learning rates are therefore independent of
// batch size.

namespace hebbpca {

enum class Schedule { Constant, InverseTime };

struct TrainConfig {
  double eta = 0.01;
  std::size_t epochs = 1000;
  double tol = 1e-8;
  Schedule schedule = Schedule::Constant;
  std::uint64_t seed = 0;
  std::size_t nodes = 1;

  void validate() const {
    if (!(eta > 0.0)) throw Error(ErrorCode::InvalidConfig, "eta must be positive");
    if (epochs < 1) throw Error(ErrorCode::InvalidConfig, "epochs must be at least 1");
    if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be positive");
    if (nodes < 1) throw Error(ErrorCode::InvalidConfig, "need at least one node");
  }

  /// Step size for zero-based epoch t. The inverse-time schedule uses
  /// eta / (1 + t / tau) with tau = epochs / 10.
  double eta_at(std::size_t t) const {
    if (schedule == Schedule::Constant) return eta;
    const double tau = std::max(1.0, static_cast<double>(epochs) / 10.0);
    return eta / (1.0 + static_cast<double>(t) / tau);
  }
};

struct TraceRow {
  std::size_t epoch = 0;  // one-based
  NodeId node = 0;
  double delta_norm = 0.0;
  double captured_variance = 0.0;
  std::optional<double> cosine_to_oracle;
};

struct TrainReport {
  std::size_t epochs_run = 0;
  std::vector<TraceRow> trace;  // epoch-major, epochs_run * nodes rows
  bool converged = false;
  std::size_t skipped_deflation_terms = 0;
};

struct TrainResult {
  WeightBasis basis;
  TrainReport report;
};

inline Vector normalize(const Vector& w, const Tolerances& tol = default_tolerances()) {
  const double n = w.norm();
  if (!(n > tol.zero_vector)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  return w / n;
}

/// Seeded unit rows: one NormalStream, row by row, each row normalized.
inline WeightBasis random_unit_rows(std::uint64_t seed, std::size_t nodes, std::size_t dims) {
  NormalStream normals(seed);
  Matrix rows = normals.matrix(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) rows.row(i).normalize();
  return WeightBasis(std::move(rows));
}

namespace detail {

inline void require_trainable(const DataMatrix& data, const Tolerances& tol) {
  if (!data.centered()) throw Error(ErrorCode::UncenteredData, "training requires centered data");
  const double trace = data.values().squaredNorm() / static_cast<double>(data.samples());
  if (!(trace > tol.degenerate)) {
    throw Error(ErrorCode::DegenerateData, "covariance is the zero matrix");
  }
}

inline void require_dims(const Vector& w, const DataMatrix& data) {
  if (static_cast<std::size_t>(w.size()) != data.dims()) {
    throw Error(ErrorCode::DimensionMismatch, "weight vector and data differ in dims");
  }
}

// (1/m) X^T y
inline Vector hebbian_term(const Matrix& x, const Vector& y) {
  return (x.transpose() * y) / static_cast<double>(x.rows());
}

inline Vector oja_update(const Vector& w, const Matrix& x, double eta) {
  const Vector y = x * w;
  const Vector h = hebbian_term(x, y);
  const double s = y.squaredNorm() / static_cast<double>(x.rows());
  return w + eta * (h - s * w);
}

inline std::optional<double> cosine(const Vector& w, const std::optional<Spectrum>& oracle,
                                    std::size_t i) {
  if (!oracle || i >= oracle->size()) return std::nullopt;
  return std::abs(w.dot(oracle->vector(i))) / w.norm();
}

inline void check_nodes(const DataMatrix& data, const TrainConfig& config,
                        const std::optional<WeightBasis>& initial) {
  config.validate();
  if (config.nodes > data.dims()) {
    throw Error(ErrorCode::InvalidConfig, "more nodes than input dimensions");
  }
  if (initial && (initial->nodes() != config.nodes || initial->dims() != data.dims())) {
    throw Error(ErrorCode::DimensionMismatch, "initial basis has the wrong shape");
  }
}

}  // namespace detail

/// Plain Hebb: w + eta (1/m) sum_s x_s y_s. Unnormalized; callers divide by
/// the length afterwards.
inline Vector hebb_step(const Vector& w, const DataMatrix& data, double eta,
                        const Tolerances& tol = default_tolerances()) {
  detail::require_dims(w, data);
  detail::require_trainable(data, tol);
  const Vector y = data.values() * w;
  const Vector h = detail::hebbian_term(data.values(), y);
  return w + eta * h;
}

/// Oja: w + eta (C w - (w^T C w) w), computed from the batch.
inline Vector oja_step(const Vector& w, const DataMatrix& data, double eta,
                       const Tolerances& tol = default_tolerances()) {
  detail::require_dims(w, data);
  detail::require_trainable(data, tol);
  return detail::oja_update(w, data.values(), eta);
}

/// Removes the component along w from every sample.
inline DataMatrix deflate(const DataMatrix& data, const Vector& w,
                          const Tolerances& tol = default_tolerances()) {
  detail::require_dims(w, data);
  const Vector u = normalize(w, tol);
  Matrix x = data.values();
  x -= (x * u) * u.transpose();
  if (data.centered()) return DataMatrix::from_centered(std::move(x), data.mean());
  return DataMatrix(std::move(x));
}

/// Sequential GHA: train one vector with Oja's rule until its step falls
/// below tol, deflate the data by it, move on to the next node.
///
/// Nodes converge after different numbers of epochs. epochs_run is the
/// largest of them and nodes that stopped earlier are reported with a zero
/// delta for the remaining epochs, so the trace stays rectangular.
inline TrainResult gha_train(const DataMatrix& data, const TrainConfig& config,
                             const std::optional<Spectrum>& oracle = std::nullopt,
                             const std::optional<WeightBasis>& initial = std::nullopt,
                             const Tolerances& tol = default_tolerances()) {
  detail::check_nodes(data, config, initial);
  detail::require_trainable(data, tol);
  const CovarianceMatrix c = covariance(data);
  const WeightBasis start =
      initial ? *initial : random_unit_rows(config.seed, config.nodes, data.dims());

  Matrix current = data.values();
  Matrix learned(start.rows().rows(), start.rows().cols());
  std::vector<std::vector<TraceRow>> per_node(config.nodes);
  bool all_converged = true;

  for (std::size_t i = 0; i < config.nodes; ++i) {
    Vector w = start.row(i);
    bool converged = false;
    for (std::size_t t = 0; t < config.epochs; ++t) {
      const double eta = config.eta_at(t);
      const Vector next = detail::oja_update(w, current, eta);
      const double delta = (next - w).norm();
      w = next;
      per_node[i].push_back({t + 1, i, delta, captured_variance(w, c), detail::cosine(w, oracle, i)});
      if (delta / eta < config.tol) {
        converged = true;
        break;
      }
    }
    all_converged = all_converged && converged;
    const Vector u = normalize(w, tol);
    learned.row(static_cast<Eigen::Index>(i)) = u.transpose();
    current -= (current * u) * u.transpose();
  }

  TrainReport report;
  report.converged = all_converged;
  for (const auto& rows : per_node) report.epochs_run = std::max(report.epochs_run, rows.size());
  report.trace.reserve(report.epochs_run * config.nodes);
  for (std::size_t e = 0; e < report.epochs_run; ++e) {
    for (std::size_t i = 0; i < config.nodes; ++i) {
      if (e < per_node[i].size()) {
        report.trace.push_back(per_node[i][e]);
      } else {
        TraceRow idle = per_node[i].back();
        idle.epoch = e + 1;
        idle.delta_norm = 0.0;
        report.trace.push_back(idle);
      }
    }
  }
  return {WeightBasis(std::move(learned)), std::move(report)};
}

struct ShpStepResult {
  Vector weights;
  std::size_t skipped_terms = 0;
};

/// One Simple Hebbian PCA update for node `self`:
///
///   w <- w + eta [ (1/m) X^T y_self - sum_j (1/m) X^T y_j (y_self^T y_j) / (y_j^T y_j) ]
///   w <- w / |w|
///
/// The sum runs over the received upstream signals only (nodes j < self).
/// A received signal with y_j^T y_j <= tol.zero_signal contributes nothing
/// and is counted in skipped_terms. The node never sees another node's
/// weights, only its own, the input batch and the received signals.
inline ShpStepResult shp_step(NodeId self, const Vector& own, const DataMatrix& batch, double eta,
                              std::span<const SignalBatch> received,
                              const Tolerances& tol = default_tolerances()) {
  detail::require_dims(own, batch);
  if (!batch.centered()) throw Error(ErrorCode::UncenteredData, "training requires centered data");
  const Matrix& x = batch.values();
  const Vector y = x * own;
  Vector grad = detail::hebbian_term(x, y);
  ShpStepResult result;
  for (const auto& upstream : received) {
    if (upstream.node >= self) {
      throw Error(ErrorCode::UnknownNode, "received a signal from a downstream node");
    }
    if (upstream.values.size() != y.size()) {
      throw Error(ErrorCode::DimensionMismatch, "signal length differs from batch size");
    }
    const double energy = upstream.values.squaredNorm();
    if (!(energy > tol.zero_signal)) {
      ++result.skipped_terms;
      continue;
    }
    grad -= detail::hebbian_term(x, upstream.values) * (y.dot(upstream.values) / energy);
  }
  result.weights = normalize(own + eta * grad, tol);
  return result;
}

/// y = X w for one node. The simulator and shp_train share this so their
/// results agree bit for bit.
inline SignalBatch emit_signal(NodeId node, const Vector& weights, const DataMatrix& batch) {
  return {node, batch.values() * weights};
}

/// Full-batch synchronous Simple Hebbian PCA. Each epoch first computes every
/// node's signal, then updates the nodes in index order from those signals.
/// Stops once max delta_norm / eta drops below tol.
inline TrainResult shp_train(const DataMatrix& data, const TrainConfig& config,
                             const std::optional<Spectrum>& oracle = std::nullopt,
                             const std::optional<WeightBasis>& initial = std::nullopt,
                             const Tolerances& tol = default_tolerances()) {
  detail::check_nodes(data, config, initial);
  detail::require_trainable(data, tol);
  const CovarianceMatrix c = covariance(data);
  const WeightBasis start =
      initial ? *initial : random_unit_rows(config.seed, config.nodes, data.dims());
  std::vector<Vector> weights;
  for (std::size_t i = 0; i < config.nodes; ++i) weights.push_back(start.row(i));

  TrainReport report;
  std::vector<SignalBatch> signals(config.nodes);
  for (std::size_t t = 0; t < config.epochs; ++t) {
    const double eta = config.eta_at(t);
    for (std::size_t i = 0; i < config.nodes; ++i) signals[i] = emit_signal(i, weights[i], data);
    double max_delta = 0.0;
    for (std::size_t i = 0; i < config.nodes; ++i) {
      ShpStepResult step = shp_step(i, weights[i], data, eta,
                                    std::span<const SignalBatch>(signals.data(), i), tol);
      const double delta = (step.weights - weights[i]).norm();
      max_delta = std::max(max_delta, delta);
      report.skipped_deflation_terms += step.skipped_terms;
      report.trace.push_back({t + 1, i, delta, captured_variance(step.weights, c),
                              detail::cosine(step.weights, oracle, i)});
      weights[i] = std::move(step.weights);
    }
    report.epochs_run = t + 1;
    if (max_delta / eta < config.tol) {
      report.converged = true;
      break;
    }
  }
  return {WeightBasis::from_rows(weights), std::move(report)};
}

}  // namespace hebbpca
