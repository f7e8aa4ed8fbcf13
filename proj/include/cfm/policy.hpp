/**
 * @file policy.hpp
 * @brief The LSTM-chain clustering policy.
 *
 * One recurrent cell plus a shared fully connected sigmoid head are applied
 * to every UE in a hierarchical order: APs in their fixed scheduling order,
 * and within each AP the UEs it masters, strongest channel first. The state
 * flows through the whole chain, so each AP's subchain starts from the
 * context left by the previous one. The head emits, per UE, the probability
 * of activating a connection towards each of the L APs.
 *
 * Parameters live in one flat vector with a fixed tensor layout so the
 * optimizer and finite-difference checks can treat them uniformly.
 */
#pragma once

#include "cfm/downlink.hpp"
#include "cfm/linalg.hpp"
#include "cfm/rng.hpp"
#include "cfm/scenario.hpp"

#include <string>
#include <vector>

namespace cfm {

struct PolicyLayout {
    int q = 0;                            // LSTM hidden size
    int L = 0;                            // AP count = head output size
    std::vector<int> fc_hidden = {256, 128};

    int input_dim() const { return L + 2; }
    int n_fc() const { return static_cast<int>(fc_hidden.size()) + 1; }
    int fc_in(int m) const { return m == 0 ? q : fc_hidden[m - 1]; }
    int fc_out(int m) const { return m == n_fc() - 1 ? L : fc_hidden[m]; }

    // Flat layout: per gate (f, i, o, c): W (q x input_dim), U (q x q), b (q);
    // then per FC layer: W (out x in), b (out).
    size_t gate_block() const {
        return static_cast<size_t>(q) * input_dim() + static_cast<size_t>(q) * q + q;
    }
    size_t w_off(int g) const { return g * gate_block(); }
    size_t u_off(int g) const { return w_off(g) + static_cast<size_t>(q) * input_dim(); }
    size_t b_off(int g) const { return u_off(g) + static_cast<size_t>(q) * q; }
    size_t fc_off(int m) const {
        size_t off = 4 * gate_block();
        for (int i = 0; i < m; ++i)
            off += static_cast<size_t>(fc_out(i)) * fc_in(i) + fc_out(i);
        return off;
    }
    size_t fc_w_off(int m) const { return fc_off(m); }
    size_t fc_b_off(int m) const { return fc_off(m) + static_cast<size_t>(fc_out(m)) * fc_in(m); }
    size_t total() const { return fc_off(n_fc()); }

    bool operator==(const PolicyLayout&) const = default;
};

enum Gate { kForget = 0, kInput = 1, kOutput = 2, kCell = 3 };

struct PolicyParams {
    PolicyLayout layout;
    std::vector<double> flat;

    PolicyParams() = default;
    explicit PolicyParams(PolicyLayout lay) : layout(std::move(lay)), flat(layout.total(), 0.0) {}

    double* w(int g) { return flat.data() + layout.w_off(g); }
    double* u(int g) { return flat.data() + layout.u_off(g); }
    double* b(int g) { return flat.data() + layout.b_off(g); }
    double* fc_w(int m) { return flat.data() + layout.fc_w_off(m); }
    double* fc_b(int m) { return flat.data() + layout.fc_b_off(m); }
    const double* w(int g) const { return flat.data() + layout.w_off(g); }
    const double* u(int g) const { return flat.data() + layout.u_off(g); }
    const double* b(int g) const { return flat.data() + layout.b_off(g); }
    const double* fc_w(int m) const { return flat.data() + layout.fc_w_off(m); }
    const double* fc_b(int m) const { return flat.data() + layout.fc_b_off(m); }
};

/// Uniform +-1/sqrt(fan-in) weights, +1 forget-gate bias, zero other biases.
PolicyParams init_policy_params(const PolicyLayout& layout, Rng& rng);

/// Feature standardization fitted on training data only: per-AP mean/std of
/// the channel gains in dB, positions scaled by the area side.
struct FeatureNorm {
    std::vector<double> mean_db;
    std::vector<double> std_db;
    double area_side = 0.0;
};

FeatureNorm fit_feature_norm(const std::vector<Matrix>& beta_samples, double area_side);

/// Per-UE input vectors of length L+2: standardized dB gains towards every
/// AP, then the position scaled to the unit square.
std::vector<std::vector<double>> build_features(const Matrix& beta, const UEDrop& drop,
                                                const FeatureNorm& norm);

struct UEOrdering {
    std::vector<std::vector<int>> subchains; // aligned with ap_order
    std::vector<int> flat;                   // concatenation, a permutation of 0..K-1
};

/// APs visited in scheduling order; within each AP its mastered UEs sorted by
/// channel gain to it, descending (ties to the lower UE index). APs without
/// mastered UEs contribute an empty subchain.
UEOrdering order_ues(const Matrix& beta, const std::vector<int>& masters,
                     const std::vector<int>& ap_order);

/// One LSTM cell evaluation; returns (output vector, cell state).
std::pair<std::vector<double>, std::vector<double>>
lstm_step(const PolicyParams& params, const std::vector<double>& xi,
          const std::vector<double>& upsilon_prev, const std::vector<double>& zeta_prev);

/// Everything backprop needs about one cell evaluation. Inputs are not
/// duplicated here: the UE id keys back into the feature table.
struct CellTrace {
    int ue = -1;
    std::vector<double> v_prev, z_prev;
    std::vector<double> f, i, o, c;
    std::vector<double> zeta, tanh_zeta;
    std::vector<double> fc_act; // concatenated activations entering each FC layer
    std::vector<double> probs;  // head output for this UE
};

struct ForwardTrace {
    std::vector<CellTrace> cells;
};

/// Runs the chain over the whole ordering and returns the K x L matrix of
/// activation probabilities, rows indexed by original UE id. Pass a trace to
/// capture intermediates for backpropagation.
Matrix forward(const PolicyParams& params, const UEOrdering& ordering,
               const std::vector<std::vector<double>>& features, ForwardTrace* trace = nullptr);

/// Independent Bernoulli draw per (UE, AP) probability; the master link of
/// each UE is forced active without a draw and contributes nothing to the
/// joint log-probability.
std::pair<ClusterAssignment, double> sample_clusters(const Matrix& probs,
                                                     const std::vector<int>& masters, Rng& rng);

/// Test-time rule: activate where the probability strictly exceeds 1/2;
/// master links always active.
ClusterAssignment threshold_clusters(const Matrix& probs, const std::vector<int>& masters);

/// Joint log-probability of a given assignment under the probability matrix,
/// master links excluded.
double cluster_log_prob(const Matrix& probs, const ClusterAssignment& clusters,
                        const std::vector<int>& masters);

/// Versioned checkpoint: layout, weights, normalization record, seed lineage.
struct Checkpoint {
    PolicyParams params;
    FeatureNorm norm;
    std::string lineage;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace cfm
