#include "cfm/access.hpp"
#include "cfm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <stdexcept>

namespace cfm {

int select_master(const Matrix& beta, int k) {
    if (k < 0 || k >= beta.cols) throw std::invalid_argument("select_master: UE index out of range");
    if (beta.rows < 1) throw std::invalid_argument("select_master: empty matrix");
    int best = 0;
    double best_val = beta(0, k);
    for (int l = 1; l < beta.rows; ++l) {
        if (beta(l, k) > best_val) {
            best_val = beta(l, k);
            best = l;
        }
    }
    return best;
}

std::vector<int> compute_masters(const Matrix& beta) {
    std::vector<int> m(beta.cols);
    for (int k = 0; k < beta.cols; ++k) m[k] = select_master(beta, k);
    return m;
}

PilotPlan assign_pilots(const Matrix& beta, const std::vector<int>& masters, int tau_p) {
    if (tau_p < 1) throw std::invalid_argument("assign_pilots: tau_p must be >= 1");
    const int K = beta.cols;
    if (static_cast<int>(masters.size()) != K)
        throw std::invalid_argument("assign_pilots: masters size mismatch");
    PilotPlan plan;
    plan.tau_p = tau_p;
    plan.masters = masters;
    plan.pilots.resize(K);
    plan.sharing_sets.assign(tau_p, {});
    for (int k = 0; k < K; ++k) {
        const int m = masters[k];
        int best_t = 0;
        double best_sum = std::numeric_limits<double>::infinity();
        for (int t = 0; t < tau_p; ++t) {
            double s = 0.0;
            for (int i : plan.sharing_sets[t]) s += beta(m, i);
            if (s < best_sum) {
                best_sum = s;
                best_t = t;
            }
        }
        plan.pilots[k] = best_t;
        plan.sharing_sets[best_t].push_back(k);
    }
    return plan;
}

Matrix compute_gamma(const Matrix& beta, const PilotPlan& plan, const UplinkConfig& cfg) {
    const int L = beta.rows;
    const int K = beta.cols;
    if (static_cast<int>(plan.pilots.size()) != K)
        throw std::invalid_argument("compute_gamma: plan/beta K mismatch");
    if (static_cast<int>(plan.sharing_sets.size()) != plan.tau_p)
        throw std::invalid_argument("compute_gamma: plan has " +
                                    std::to_string(plan.sharing_sets.size()) + " sharing sets for tau_p " +
                                    std::to_string(plan.tau_p));
    Matrix gamma(L, K);
    const double tp = static_cast<double>(plan.tau_p);
    for (int l = 0; l < L; ++l) {
        // per-pilot interference sums reused across the UEs sharing it
        std::vector<double> pilot_sum(plan.tau_p, 0.0);
        for (int t = 0; t < plan.tau_p; ++t)
            for (int i : plan.sharing_sets[t]) pilot_sum[t] += cfg.eta_mw * beta(l, i);
        for (int k = 0; k < K; ++k) {
            const double b = beta(l, k);
            const double den = tp * pilot_sum[plan.pilots[k]] + cfg.sigma_ul2_mw;
            gamma(l, k) = tp * cfg.eta_mw * b * b / den;
        }
    }
    return gamma;
}

std::vector<std::complex<double>>
despread_pilot(const std::vector<std::vector<std::complex<double>>>& co_pilot_h,
               double eta_mw, int tau_p, const std::vector<std::complex<double>>& noise) {
    std::vector<std::complex<double>> y = noise;
    const double amp = std::sqrt(static_cast<double>(tau_p) * eta_mw);
    for (const auto& h : co_pilot_h) {
        if (h.size() != y.size()) throw std::invalid_argument("despread_pilot: antenna count mismatch");
        for (size_t n = 0; n < y.size(); ++n) y[n] += amp * h[n];
    }
    return y;
}

std::vector<std::complex<double>>
mmse_estimate(const std::vector<std::complex<double>>& y, double gamma_lk, double beta_lk,
              double eta_mw, int tau_p) {
    const double scale = gamma_lk / (std::sqrt(static_cast<double>(tau_p) * eta_mw) * beta_lk);
    std::vector<std::complex<double>> h_hat(y.size());
    for (size_t n = 0; n < y.size(); ++n) h_hat[n] = scale * y[n];
    return h_hat;
}

EstimationReport mc_validate_estimation(const Matrix& beta, const PilotPlan& plan,
                                        const UplinkConfig& cfg, int N, int trials, Rng& rng) {
    if (trials < 1) throw std::invalid_argument("mc_validate_estimation: trials must be >= 1");
    if (N < 1) throw std::invalid_argument("mc_validate_estimation: N must be >= 1");
    const int L = beta.rows;
    const int K = beta.cols;
    const Matrix gamma = compute_gamma(beta, plan, cfg);
    EstimationReport report;
    report.rel_err = Matrix(L, K);
    const double noise_amp = std::sqrt(cfg.sigma_ul2_mw * 0.5);
    std::vector<std::complex<double>> noise(N);
    for (int l = 0; l < L; ++l) {
        for (int k = 0; k < K; ++k) {
            const auto& sharers = plan.sharing_sets[plan.pilots[k]];
            std::vector<double> beta_sharers;
            beta_sharers.reserve(sharers.size());
            for (int i : sharers) beta_sharers.push_back(beta(l, i));
            double acc = 0.0;
            for (int trial = 0; trial < trials; ++trial) {
                const auto h = sample_small_scale(beta_sharers, N, rng);
                for (int n = 0; n < N; ++n)
                    noise[n] = std::complex<double>(noise_amp * rng.gauss(), noise_amp * rng.gauss());
                const auto y = despread_pilot(h, cfg.eta_mw, plan.tau_p, noise);
                const auto h_hat = mmse_estimate(y, gamma(l, k), beta(l, k), cfg.eta_mw, plan.tau_p);
                for (int n = 0; n < N; ++n) acc += std::norm(h_hat[n]);
            }
            const double empirical = acc / (static_cast<double>(trials) * N);
            const double rel = std::abs(empirical - gamma(l, k)) / gamma(l, k);
            report.rel_err(l, k) = rel;
            report.max_rel_err = std::max(report.max_rel_err, rel);
        }
    }
    return report;
}

} // namespace cfm
