/**
 * @file downlink.hpp
 * @brief Downlink power allocation, the closed-form per-UE SINR and spectral
 * efficiency under MR precoding with MMSE estimates, and the clustering
 * objective (sum SE minus a per-connection penalty).
 */
#pragma once

#include "cfm/access.hpp"
#include "cfm/linalg.hpp"

#include <cstdint>
#include <vector>

namespace cfm {

/// Binary L x K service matrix: entry (l, k) set means AP l serves UE k.
struct ClusterAssignment {
    int L = 0;
    int K = 0;
    std::vector<uint8_t> active;

    ClusterAssignment() = default;
    ClusterAssignment(int l, int k) : L(l), K(k), active(static_cast<size_t>(l) * k, 0) {}

    bool is_active(int l, int k) const { return active[static_cast<size_t>(l) * K + k] != 0; }
    void set(int l, int k, bool v) { active[static_cast<size_t>(l) * K + k] = v ? 1 : 0; }

    int connection_count() const {
        int c = 0;
        for (uint8_t a : active) c += a;
        return c;
    }
    bool column_served(int k) const {
        for (int l = 0; l < L; ++l)
            if (is_active(l, k)) return true;
        return false;
    }
    bool every_ue_served() const {
        for (int k = 0; k < K; ++k)
            if (!column_served(k)) return false;
        return true;
    }
};

struct PowerAllocation {
    Matrix rho; // L x K, mW; nonzero exactly on active links
};

struct DownlinkConfig {
    double rho_max_mw = 200.0;
    double sigma_dl2_mw = 0.0;
    int N = 4;
    int tau_c = 200;
    int tau_p = 0;
    int tau_u = 0;
    double lambda = 0.0; // penalty per active connection, bit/s/Hz

    int tau_d() const { return tau_c - tau_p - tau_u; }
};

/// Square-root-weighted split of each AP's power budget across the UEs it
/// serves: rho[l][k] = rho_max * sqrt(beta[l][k]) / sum_{i served by l} sqrt(beta[l][i]).
/// Rows with at least one active link sum to rho_max exactly.
PowerAllocation allocate_power(const Matrix& beta, const ClusterAssignment& clusters, double rho_max_mw);

/// Effective downlink SINR of UE k:
///
///          N * ( sum_{l in L_k} sqrt(rho[l][k] gamma[l][k]) )^2
///   -----------------------------------------------------------------------
///   sum_i sum_{l in L_i} rho[l][i] beta[l][k]
///     + N * sum_{i sharing k's pilot, i != k} ( sum_{l in L_i} sqrt(rho[l][i] gamma[l][k]) )^2
///     + sigma_dl^2
///
/// The contamination term deliberately uses the target UE's gamma at each AP.
double sinr(int k, const ClusterAssignment& clusters, const PowerAllocation& rho,
            const Matrix& beta, const Matrix& gamma, const PilotPlan& plan,
            const DownlinkConfig& cfg);

/// (tau_d / tau_c) * log2(1 + SINR), bit/s/Hz.
double spectral_efficiency(double sinr_value, const DownlinkConfig& cfg);

/// Per-UE SE under the square-root power rule.
std::vector<double> per_ue_se(const ClusterAssignment& clusters, const Matrix& beta,
                              const Matrix& gamma, const PilotPlan& plan, const DownlinkConfig& cfg);

/// Sum SE minus lambda times the connection count. Throws if any UE has an
/// empty cluster.
double objective(const ClusterAssignment& clusters, const Matrix& beta, const Matrix& gamma,
                 const PilotPlan& plan, const DownlinkConfig& cfg);

} // namespace cfm
