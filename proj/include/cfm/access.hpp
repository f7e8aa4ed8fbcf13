/**
 * @file access.hpp
 * @brief Network-joining logic: master-AP selection, sequential pilot
 * assignment, the gamma coefficients of the MMSE channel estimate, and a
 * Monte-Carlo validator for the whole pilot-phase estimation chain.
 */
#pragma once

#include "cfm/linalg.hpp"
#include "cfm/rng.hpp"

#include <complex>
#include <vector>

namespace cfm {

struct PilotPlan {
    std::vector<int> masters;                    // per-UE master AP index
    std::vector<int> pilots;                     // per-UE pilot index in [0, tau_p)
    std::vector<std::vector<int>> sharing_sets;  // per-pilot UE index sets
    int tau_p = 0;
};

struct UplinkConfig {
    double eta_mw = 100.0;       // per-UE uplink power; one value broadcast to all UEs
    double sigma_ul2_mw = 0.0;   // uplink noise power
    int tau_p = 0;
    int tau_c = 0;
};

/// AP with the strongest large-scale channel to UE k; ties to the lowest index.
int select_master(const Matrix& beta, int k);

/// select_master applied to every column.
std::vector<int> compute_masters(const Matrix& beta);

/// Sequential join in ascending UE index: each UE takes the pilot minimizing
/// the sum of co-pilot channel gains at its master AP over the sets built so
/// far (empty sets count 0, ties to the lowest pilot index).
PilotPlan assign_pilots(const Matrix& beta, const std::vector<int>& masters, int tau_p);

/// Mean-square magnitude per antenna of the MMSE channel estimate:
/// gamma[l][k] = tau_p eta beta[l][k]^2 / (tau_p sum_{i in P_{t_k}} eta beta[l][i] + sigma_ul^2).
Matrix compute_gamma(const Matrix& beta, const PilotPlan& plan, const UplinkConfig& cfg);

struct EstimationReport {
    Matrix rel_err;     // per (AP, UE) relative error of E{||h_hat||^2}/N vs gamma
    double max_rel_err = 0.0;
};

/// Despread pilot observation at one AP: sum of co-pilot channel vectors
/// scaled by sqrt(tau_p * eta) plus the post-correlation noise (variance
/// sigma_ul^2 per antenna). co_pilot_h must follow the sharing-set order.
std::vector<std::complex<double>>
despread_pilot(const std::vector<std::vector<std::complex<double>>>& co_pilot_h,
               double eta_mw, int tau_p, const std::vector<std::complex<double>>& noise);

/// MMSE estimate of h_{kl} from the despread observation:
/// h_hat = gamma / (sqrt(tau_p * eta) * beta) * y.
std::vector<std::complex<double>>
mmse_estimate(const std::vector<std::complex<double>>& y, double gamma_lk, double beta_lk,
              double eta_mw, int tau_p);

/// Simulates the pilot phase in the despread domain (co-pilot channels scaled
/// by sqrt(tau_p * eta) plus per-antenna noise of variance sigma_ul^2, which
/// is what orthogonal pilots leave after correlation), applies the MMSE
/// scaling, and compares the empirical estimate energy to gamma.
EstimationReport mc_validate_estimation(const Matrix& beta, const PilotPlan& plan,
                                        const UplinkConfig& cfg, int N, int trials, Rng& rng);

} // namespace cfm
