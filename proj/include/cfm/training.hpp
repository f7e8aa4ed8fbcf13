/**
 * @file training.hpp
 * @brief Score-function policy-gradient training of the clustering policy:
 * exact backpropagation of the joint Bernoulli log-likelihood through the FC
 * head and through time along the whole LSTM chain, an adaptive-moment
 * optimizer, the per-drop update step, the epoch loop, and the
 * finite-difference gradient verifier.
 */
#pragma once

#include "cfm/access.hpp"
#include "cfm/channel.hpp"
#include "cfm/downlink.hpp"
#include "cfm/policy.hpp"

#include <functional>
#include <vector>

namespace cfm {

struct TrainConfig {
    int epochs = 1;
    int batch_size = 1;
    double learning_rate = 1e-5;
    double lambda = 0.0;
    uint64_t seed = 0;
    bool baseline_variance_reduction = false;
    int checkpoint_every = 0; // 0 = final checkpoint only
};

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    long long t = 0;

    explicit OptimizerState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// Gradient of sum over non-forced links of [a log p + (1-a) log(1-p)] with
/// respect to every parameter, flat-aligned with PolicyParams.
std::vector<double> grad_log_prob(const PolicyParams& params, const UEOrdering& ordering,
                                  const std::vector<std::vector<double>>& features,
                                  const ClusterAssignment& clusters,
                                  const std::vector<int>& masters);

/// Same, reusing an existing forward trace.
std::vector<double> grad_log_prob_traced(const PolicyParams& params, const ForwardTrace& trace,
                                         const std::vector<std::vector<double>>& features,
                                         const ClusterAssignment& clusters,
                                         const std::vector<int>& masters);

/// Adaptive-moment ascent step (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with
/// bias correction; params move along +grads.
void adam_update(PolicyParams& params, const std::vector<double>& grads, OptimizerState& opt,
                 double learning_rate);

struct BatchStats {
    double mean_reward = 0.0;
    double mean_se_sum = 0.0;
    double mean_connections = 0.0;
};

/// One policy-gradient step on a batch of fading realizations sharing a UE
/// drop. Per element: rebuild masters/pilots/gamma from its beta, run the
/// chain, sample an assignment, score it with the penalized sum-SE objective,
/// and accumulate the score-function gradient. The estimate is
/// (1/B) sum_b (R_b - Rbar) grad log p_b, with Rbar the batch mean when
/// variance reduction is on and 0 otherwise.
BatchStats reinforce_step(PolicyParams& params, OptimizerState& opt, const Scenario& scenario,
                          const UEDrop& drop, const std::vector<LargeScaleRealization>& batch,
                          const UplinkConfig& ul, const DownlinkConfig& dl,
                          const FeatureNorm& norm, double learning_rate,
                          bool variance_reduction, Rng& rng);

struct EpochStats {
    double mean_reward = 0.0;
    double mean_se_sum = 0.0;
    double mean_connections = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> history;
};

/// Full training run. Per epoch the drops are visited in a reshuffled order;
/// for each drop, batch_size shadow-fading realizations are produced at fixed
/// positions and one update step is taken. The feature normalization is
/// fitted once, on the training drops only. on_checkpoint, when set, fires
/// every checkpoint_every epochs (1-based) with the current state.
TrainResult train(const Scenario& scenario, const std::vector<UEDrop>& train_drops,
                  const ChannelConfig& chan, const UplinkConfig& ul, const DownlinkConfig& dl,
                  const PolicyLayout& layout, const TrainConfig& tcfg,
                  const std::function<void(int, const Checkpoint&)>& on_checkpoint = nullptr);

/// Central finite differences on the chain log-likelihood against the
/// analytic gradient; returns the worst relative disagreement. Entries where
/// both sides are below 1e-6 in magnitude are compared absolutely at 1e-10.
double gradient_check_max_rel_err(const PolicyParams& params, const UEOrdering& ordering,
                                  const std::vector<std::vector<double>>& features,
                                  const ClusterAssignment& clusters,
                                  const std::vector<int>& masters, double step = 1e-5);

} // namespace cfm
