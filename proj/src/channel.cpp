#include "cfm/channel.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace cfm {

double path_loss_db(double d_m, double fc_ghz) {
    if (d_m <= 0.0) throw std::domain_error("path_loss_db: distance must be positive");
    if (fc_ghz < 2.0 || fc_ghz > 6.0) {
        static std::atomic<bool> warned{false};
        if (!warned.exchange(true))
            std::fprintf(stderr, "warning: carrier %.3f GHz outside the microcell model range [2, 6] GHz\n", fc_ghz);
    }
    return 36.7 * std::log10(d_m) + 22.7 + 26.0 * std::log10(fc_ghz);
}

Matrix shadow_covariance(const UEDrop& drop, const ShadowModel& model) {
    if (drop.K < 1) throw std::invalid_argument("shadow_covariance: empty UE drop");
    if (model.sigma_sf_db < 0.0) throw std::invalid_argument("shadow_covariance: sigma_sf must be >= 0");
    if (model.delta_sf_m <= 0.0) throw std::invalid_argument("shadow_covariance: delta_sf must be positive");
    const int K = drop.K;
    const double var = model.sigma_sf_db * model.sigma_sf_db;
    Matrix cov(K, K);
    for (int i = 0; i < K; ++i) {
        cov(i, i) = var;
        for (int j = i + 1; j < K; ++j) {
            const double d = distance_3d(drop.ue_positions[i], drop.ue_positions[j], 0.0);
            const double c = var * std::exp2(-d / model.delta_sf_m);
            cov(i, j) = c;
            cov(j, i) = c;
        }
    }
    return cov;
}

Matrix sample_shadow(const Matrix& cov, int L, Rng& rng) {
    if (cov.rows != cov.cols) throw std::invalid_argument("sample_shadow: covariance not square");
    if (L < 1) throw std::invalid_argument("sample_shadow: L must be >= 1");
    const int K = cov.rows;
    Matrix chol;
    if (!cholesky_psd(cov, chol)) {
        Matrix reg = cov;
        for (int i = 0; i < K; ++i) reg(i, i) += 1e-10;
        if (!cholesky_psd(reg, chol))
            throw std::runtime_error("sample_shadow: covariance not PSD even after regularization");
    }
    Matrix out(L, K);
    std::vector<double> z(K);
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < K; ++i) z[i] = rng.gauss();
        // row = (chol * z)^T
        for (int i = 0; i < K; ++i) {
            double acc = 0.0;
            for (int j = 0; j <= i; ++j) acc += chol(i, j) * z[j];
            out(l, i) = acc;
        }
    }
    return out;
}

LargeScaleRealization large_scale(const Scenario& scenario, const UEDrop& drop,
                                  const Matrix& shadow_db, double fc_ghz) {
    const int L = scenario.L;
    const int K = drop.K;
    if (shadow_db.rows != L || shadow_db.cols != K)
        throw std::invalid_argument("large_scale: shadow matrix shape mismatch");
    LargeScaleRealization ls;
    ls.shadow_db = shadow_db;
    ls.pathloss_db = Matrix(L, K);
    ls.beta = Matrix(L, K);
    for (int l = 0; l < L; ++l) {
        for (int k = 0; k < K; ++k) {
            const double d = distance_3d(scenario.ap_positions[l], drop.ue_positions[k], scenario.height_diff);
            const double pl = path_loss_db(d, fc_ghz);
            ls.pathloss_db(l, k) = pl;
            ls.beta(l, k) = std::pow(10.0, (shadow_db(l, k) - pl) / 10.0);
        }
    }
    return ls;
}

std::vector<std::vector<std::complex<double>>>
sample_small_scale(const std::vector<double>& beta_col, int N, Rng& rng) {
    if (N < 1) throw std::invalid_argument("sample_small_scale: N must be >= 1");
    std::vector<std::vector<std::complex<double>>> h(beta_col.size());
    const double half = std::sqrt(0.5);
    for (size_t l = 0; l < beta_col.size(); ++l) {
        h[l].resize(N);
        const double amp = std::sqrt(beta_col[l]);
        for (int n = 0; n < N; ++n) {
            // real and imaginary parts each N(0, 1/2): unit-variance entries
            h[l][n] = std::complex<double>(amp * half * rng.gauss(), amp * half * rng.gauss());
        }
    }
    return h;
}

void write_beta_csv(std::ostream& os, const LargeScaleRealization& ls) {
    os << std::setprecision(17);
    for (int l = 0; l < ls.beta.rows; ++l) {
        for (int k = 0; k < ls.beta.cols; ++k) {
            if (k) os << ",";
            os << ls.beta(l, k);
        }
        os << "\n";
    }
}

} // namespace cfm
