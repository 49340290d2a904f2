#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "dechw/aggregation.hpp"
#include "dechw/config.hpp"
#include "dechw/data.hpp"
#include "dechw/hessian.hpp"
#include "dechw/metrics.hpp"
#include "dechw/model.hpp"
#include "dechw/optimizer.hpp"
#include "dechw/parallel.hpp"
#include "dechw/topology.hpp"
#include "dechw/train.hpp"

namespace dechw {

// One device's full state. Everything a round touches lives here or in the
// staged bundles, so per-node work is independent within a round.
struct NodeState {
  int id = -1;
  std::vector<float> params;
  OptimizerState<float> opt;
  HessianState<float> hess;
  DataPartition partition;

  double last_train_loss = 0.0;
  double last_raw_hess_norm = 0.0;          // 0 when no estimate ran this round
  std::size_t last_fallback_count = 0;
  std::vector<double> last_tracked_weights;  // aggregation weights at the tracked index
};

// What a node broadcast at the end of the previous round.
struct StagedBundle {
  std::vector<float> params;
  std::vector<float> hessian;  // empty when the strategy does not exchange it
};

inline ModelSpec model_spec_from_config(const ExperimentConfig& cfg, const Dataset& train) {
  std::size_t sample_numel = train.features.sample_numel();
  if (cfg.architecture == "mlp")
    return make_mlp_spec(static_cast<int>(sample_numel), cfg.hidden, train.num_classes);

  ModelSpec spec;
  if (cfg.architecture == "cnn-mnist")
    spec = make_cnn_mnist_spec();
  else if (cfg.architecture == "cnn-fashion")
    spec = make_cnn_fashion_spec();
  else if (cfg.architecture == "cnn-cifar")
    spec = make_cnn_cifar_spec();
  else
    throw ConfigError("model.architecture: unsupported architecture '" + cfg.architecture + "'");
  if (shape_numel(spec.input_shape) != sample_numel)
    throw ConfigError("model.architecture: " + cfg.architecture + " expects " +
                      std::to_string(shape_numel(spec.input_shape)) +
                      " input values per sample, dataset has " + std::to_string(sample_numel));
  if (train.num_classes != spec.num_classes)
    throw ConfigError("model.architecture: " + cfg.architecture + " is a " +
                      std::to_string(spec.num_classes) + "-class model, dataset has " +
                      std::to_string(train.num_classes));
  return spec;
}

// Per-node accuracy on the shared test set plus mean and population std.
struct EvalResult {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_node;
};

template <typename Nodes>
EvalResult evaluate_nodes(const Nodes& nodes, const ResolvedModel& rm, const Dataset& test,
                          int workers) {
  if (test.size() == 0) throw DataError("evaluation needs a non-empty test set");
  EvalResult res;
  res.per_node.assign(nodes.size(), 0.0);

  parallel_for(nodes.size(), workers, [&](std::size_t i) {
    Workspace<float> ws;
    const std::vector<float>& params = nodes[i].params;
    long correct = 0;
    const int chunk = 256;
    std::vector<int> idx;
    for (int at = 0; at < test.size(); at += chunk) {
      int len = std::min(chunk, test.size() - at);
      idx.resize(len);
      for (int k = 0; k < len; ++k) idx[k] = at + k;
      Tensor<float> batch = gather_batch<float>(test, idx);
      const Tensor<float>& logits = forward<float>(params, rm, batch, ws);
      for (int b = 0; b < len; ++b) {
        const float* z = logits.sample(b);
        int best = 0;
        for (int c = 1; c < rm.spec.num_classes; ++c)
          if (z[c] > z[best]) best = c;
        if (best == test.labels[at + b]) ++correct;
      }
    }
    res.per_node[i] = static_cast<double>(correct) / test.size();
  });

  double sum = 0.0, sum2 = 0.0;
  for (double a : res.per_node) {
    sum += a;
    sum2 += a * a;
  }
  double n = static_cast<double>(res.per_node.size());
  res.mean = sum / n;
  double var = sum2 / n - res.mean * res.mean;
  res.stddev = var > 0 ? std::sqrt(var) : 0.0;
  return res;
}

// Synchronous decentralized simulation. Construction performs the round-0
// bootstrap (random init, local training, Hessian estimate, first broadcast);
// run_round then executes aggregate -> train -> estimate -> broadcast for
// rounds 1..T against the previous round's staged bundles only.
class Simulation {
 public:
  explicit Simulation(const ExperimentConfig& cfg) : cfg_(cfg), workers_(default_worker_count()) {
    validate_config(cfg_);

    if (cfg_.topology_model == "erdos-renyi")
      topo_ = gen_erdos_renyi(cfg_.nodes, cfg_.edge_probability, cfg_.topology_seed);
    else
      topo_ = load_edge_list(cfg_.edge_list_path, cfg_.nodes);
    if (!is_connected(topo_))
      std::fprintf(stderr, "warning: topology is disconnected; aggregation stays local\n");

    if (cfg_.data_source == "synthetic") {
      Dataset all = gen_synthetic(cfg_.classes, cfg_.samples_per_class + cfg_.test_samples_per_class,
                                  cfg_.input_dim, cfg_.class_separation, cfg_.data_seed);
      auto [train, test] = split_by_class_position(all, cfg_.samples_per_class);
      train_ = std::move(train);
      test_ = std::move(test);
    } else {
      train_ = load_idx(cfg_.train_images, cfg_.train_labels);
      test_ = load_idx(cfg_.test_images, cfg_.test_labels);
      int classes = std::max(train_.num_classes, test_.num_classes);
      train_.num_classes = test_.num_classes = classes;
    }

    PartitionSpec pspec{cfg_.alpha, cfg_.partition_seed, cfg_.min_samples_per_node};
    auto parts = dirichlet_partition(train_, cfg_.nodes, pspec);

    rm_ = resolve_model(model_spec_from_config(cfg_, train_));
    m_ = rm_.param_count;
    if (cfg_.tracked_param_index >= static_cast<long long>(m_))
      throw ConfigError("run.tracked_param_index: index " +
                        std::to_string(cfg_.tracked_param_index) + " outside model with " +
                        std::to_string(m_) + " parameters");

    nodes_.resize(cfg_.nodes);
    staged_.resize(cfg_.nodes);
    for (int i = 0; i < cfg_.nodes; ++i) {
      NodeState& node = nodes_[i];
      node.id = i;
      std::uint64_t init_seed =
          cfg_.homogeneous_init ? cfg_.master_seed : cfg_.master_seed ^ static_cast<std::uint64_t>(i);
      node.params = build_model<float>(rm_, init_seed);
      node.opt = OptimizerState<float>(static_cast<float>(cfg_.learning_rate),
                                       static_cast<float>(cfg_.momentum), m_);
      node.hess = HessianState<float>(m_, cfg_.beta, cfg_.no_accumulation);
      node.partition = std::move(parts[i]);
    }

    // Round 0: train, estimate, broadcast.
    parallel_for(nodes_.size(), workers_, [&](std::size_t i) { bootstrap_node(static_cast<int>(i)); });
    stage_bundles(0);
  }

  RoundMetrics run_round(int t, bool do_eval = true) {
    if (t < 1 || t > cfg_.rounds) throw IndexError("round " + std::to_string(t) + " outside [1,T]");
    const bool hess_round = cfg_.strategy == Strategy::kDecHW && t <= cfg_.theta;

    parallel_for(nodes_.size(), workers_, [&](std::size_t ni) {
      int i = static_cast<int>(ni);
      NodeState& node = nodes_[i];

      std::vector<NeighborBundle<float>> bundles = collect_bundles(i, hess_round);
      std::span<const NeighborBundle<float>> view(bundles);
      AggregationOutcome<float> outcome =
          hess_round ? dechw_aggregate<float>(view) : dechetero_aggregate<float>(view);
      node.last_fallback_count = outcome.stats.fallback_count;
      if (cfg_.tracked_param_index >= 0) {
        std::size_t n = static_cast<std::size_t>(cfg_.tracked_param_index);
        std::optional<std::vector<double>> p =
            hess_round ? hessian_weights<float>(view, n) : std::nullopt;
        node.last_tracked_weights = p ? std::move(*p) : size_weights<float>(view);
      }
      node.params = std::move(outcome.params);

      Workspace<float> ws;
      std::mt19937_64 train_rng =
          make_rng({cfg_.master_seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                    stream::kShuffle});
      TrainResult tr = local_train<float>(node.params, node.opt, rm_, train_, node.partition,
                                          cfg_.epochs, cfg_.batch_size, train_rng, ws);
      node.last_train_loss = tr.final_epoch_loss;

      if (hess_round) {
        std::mt19937_64 hess_rng =
            make_rng({cfg_.master_seed, static_cast<std::uint64_t>(i),
                      static_cast<std::uint64_t>(t), stream::kHessianSubsample});
        RawHessianDiag<float> raw = estimate_gn_diag<float>(node.params, rm_, train_,
                                                            node.partition, cfg_.sample_budget,
                                                            hess_rng, ws);
        accumulate(node.hess, raw);
        node.last_raw_hess_norm = raw.norm;
      } else {
        node.last_raw_hess_norm = 0.0;
      }
    });

    if (t < cfg_.rounds) stage_bundles(t);

    RoundMetrics m;
    m.round = t;
    m.scalars_sent_cum = scalars_sent_;
    double loss = 0.0, norm = 0.0, fallback = 0.0;
    for (const NodeState& node : nodes_) {
      loss += node.last_train_loss;
      norm += node.last_raw_hess_norm;
      fallback += static_cast<double>(node.last_fallback_count) / static_cast<double>(m_);
    }
    m.mean_train_loss = loss / nodes_.size();
    m.mean_hess_norm = norm / nodes_.size();
    m.fallback_frac = fallback / nodes_.size();
    if (do_eval) {
      EvalResult ev = evaluate_nodes(nodes_, rm_, test_, workers_);
      m.mean_acc = ev.mean;
      m.std_acc = ev.stddev;
    }
    return m;
  }

  const ExperimentConfig& config() const { return cfg_; }
  const Topology& topology() const { return topo_; }
  const Dataset& train_set() const { return train_; }
  const Dataset& test_set() const { return test_; }
  const ResolvedModel& model() const { return rm_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  std::size_t param_count() const { return m_; }
  long long scalars_sent() const { return scalars_sent_; }
  int workers() const { return workers_; }

  EvalResult evaluate() const { return evaluate_nodes(nodes_, rm_, test_, workers_); }

 private:
  void bootstrap_node(int i) {
    NodeState& node = nodes_[i];
    Workspace<float> ws;
    std::mt19937_64 train_rng = make_rng(
        {cfg_.master_seed, static_cast<std::uint64_t>(i), 0ULL, stream::kShuffle});
    TrainResult tr = local_train<float>(node.params, node.opt, rm_, train_, node.partition,
                                        cfg_.epochs, cfg_.batch_size, train_rng, ws);
    node.last_train_loss = tr.final_epoch_loss;
    if (cfg_.strategy == Strategy::kDecHW && cfg_.theta >= 1) {
      std::mt19937_64 hess_rng = make_rng(
          {cfg_.master_seed, static_cast<std::uint64_t>(i), 0ULL, stream::kHessianSubsample});
      RawHessianDiag<float> raw = estimate_gn_diag<float>(node.params, rm_, train_, node.partition,
                                                          cfg_.sample_budget, hess_rng, ws);
      accumulate(node.hess, raw);
      node.last_raw_hess_norm = raw.norm;
    }
  }

  // Broadcast of round-t state, consumed by aggregations at round t+1. The
  // Hessian rides along only while round t+1 still aggregates with it, which
  // yields exactly theta Hessian payloads per sender over a run.
  void stage_bundles(int t) {
    const bool with_hessian =
        cfg_.strategy == Strategy::kDecHW && static_cast<long long>(t) + 1 <= cfg_.theta;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      staged_[i].params = nodes_[i].params;
      staged_[i].hessian = with_hessian ? nodes_[i].hess.accumulated : std::vector<float>{};
      long deg = static_cast<long>(topo_.neighborhood(static_cast<int>(i)).size());
      scalars_sent_ += static_cast<long long>(deg) * static_cast<long long>(m_) *
                       (with_hessian ? 2 : 1);
    }
  }

  std::vector<NeighborBundle<float>> collect_bundles(int i, bool need_hessian) const {
    const std::vector<int>& nbrs = topo_.neighborhood(i);
    std::vector<int> participants;
    participants.reserve(nbrs.size() + 1);
    // ascending sender id, self included
    std::size_t at = 0;
    while (at < nbrs.size() && nbrs[at] < i) participants.push_back(nbrs[at++]);
    participants.push_back(i);
    while (at < nbrs.size()) participants.push_back(nbrs[at++]);

    std::vector<NeighborBundle<float>> bundles;
    bundles.reserve(participants.size());
    for (int j : participants) {
      NeighborBundle<float> b;
      b.sender = j;
      b.params = staged_[j].params;
      if (need_hessian) b.hessian = staged_[j].hessian;
      b.dataset_size = nodes_[j].partition.size();
      bundles.push_back(b);
    }
    return bundles;
  }

  ExperimentConfig cfg_;
  int workers_ = 1;
  Topology topo_;
  Dataset train_, test_;
  ResolvedModel rm_;
  std::size_t m_ = 0;
  std::vector<NodeState> nodes_;
  std::vector<StagedBundle> staged_;
  long long scalars_sent_ = 0;
};

// Called after every round, evaluated or not; metrics rows reach the CSV only
// on the evaluation cadence.
using RoundObserver = std::function<void(const Simulation&, const RoundMetrics&, bool evaluated)>;

inline std::vector<RoundMetrics> run_experiment(const ExperimentConfig& cfg,
                                                MetricsCsvWriter* writer = nullptr,
                                                const RoundObserver& observer = {}) {
  Simulation sim(cfg);
  std::vector<RoundMetrics> rows;
  for (int t = 1; t <= cfg.rounds; ++t) {
    bool do_eval = (t % cfg.eval_every == 0) || t == cfg.rounds;
    RoundMetrics m = sim.run_round(t, do_eval);
    if (do_eval) {
      if (writer) writer->write(m);
      rows.push_back(m);
    }
    if (observer) observer(sim, m, do_eval);
  }
  return rows;
}

}  // namespace dechw
