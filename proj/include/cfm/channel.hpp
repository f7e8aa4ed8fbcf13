/**
 * @file channel.hpp
 * @brief Large-scale fading (3GPP microcell path loss + spatially correlated
 * lognormal shadowing) and Rayleigh small-scale draws for Monte-Carlo checks.
 *
 * Convention: every L x K matrix has APs on rows and UEs on columns. Powers
 * are held in linear milliwatt / dimensionless scale internally; dB appears
 * only at construction and I/O boundaries.
 */
#pragma once

#include <complex>
#include <iosfwd>
#include <vector>

#include "cfm/linalg.hpp"
#include "cfm/rng.hpp"
#include "cfm/scenario.hpp"

namespace cfm {

struct ShadowModel {
    double sigma_sf_db = 4.0; // shadow-fading std deviation, dB
    double delta_sf_m = 9.0;  // correlation length, meters
};

struct ChannelConfig {
    double fc_ghz = 2.0;
    ShadowModel shadow;
};

struct LargeScaleRealization {
    Matrix beta;        // L x K, linear power ratio
    Matrix shadow_db;   // L x K, dB
    Matrix pathloss_db; // L x K, dB
};

/// 3GPP microcell NLoS path loss: 36.7 log10(d) + 22.7 + 26 log10(fc),
/// d in meters, fc in GHz. The model is specified for fc in [2, 6] GHz;
/// outside that range a one-time warning is printed and the formula is
/// evaluated anyway.
double path_loss_db(double d_m, double fc_ghz);

/// K x K shadow-fading covariance across UEs seen from one AP:
/// entry (i,j) = sigma^2 * 2^(-d_ij / delta) with planar UE-UE distance.
Matrix shadow_covariance(const UEDrop& drop, const ShadowModel& model);

/// L x K dB matrix: each row is an independent zero-mean Gaussian draw with
/// the given K x K covariance (shadowing is correlated across UEs, not APs).
Matrix sample_shadow(const Matrix& cov, int L, Rng& rng);

/// Assembles beta[l][k] = 10^((SF_dB - PL_dB)/10) from 3D distances.
LargeScaleRealization large_scale(const Scenario& scenario, const UEDrop& drop,
                                  const Matrix& shadow_db, double fc_ghz);

/// Small-scale channel vectors for one UE towards every AP:
/// h_l = sqrt(beta_l) * h_tilde with h_tilde i.i.d. CN(0, I_N).
std::vector<std::vector<std::complex<double>>>
sample_small_scale(const std::vector<double>& beta_col, int N, Rng& rng);

/// CSV dump of the linear beta matrix (row = AP, column = UE).
void write_beta_csv(std::ostream& os, const LargeScaleRealization& ls);

} // namespace cfm
