#include "cfm/downlink.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cfm {

PowerAllocation allocate_power(const Matrix& beta, const ClusterAssignment& clusters, double rho_max_mw) {
    if (beta.rows != clusters.L || beta.cols != clusters.K)
        throw std::invalid_argument("allocate_power: shape mismatch");
    if (rho_max_mw <= 0.0) throw std::invalid_argument("allocate_power: rho_max must be positive");
    PowerAllocation p;
    p.rho = Matrix(clusters.L, clusters.K);
    for (int l = 0; l < clusters.L; ++l) {
        double denom = 0.0;
        for (int k = 0; k < clusters.K; ++k)
            if (clusters.is_active(l, k)) denom += std::sqrt(beta(l, k));
        if (denom <= 0.0) continue;
        for (int k = 0; k < clusters.K; ++k)
            if (clusters.is_active(l, k)) p.rho(l, k) = rho_max_mw * std::sqrt(beta(l, k)) / denom;
    }
    return p;
}

double sinr(int k, const ClusterAssignment& clusters, const PowerAllocation& rho,
            const Matrix& beta, const Matrix& gamma, const PilotPlan& plan,
            const DownlinkConfig& cfg) {
    const int L = clusters.L;
    const int K = clusters.K;
    const double N = static_cast<double>(cfg.N);

    double coherent = 0.0;
    for (int l = 0; l < L; ++l)
        if (clusters.is_active(l, k)) coherent += std::sqrt(rho.rho(l, k) * gamma(l, k));
    const double numerator = N * coherent * coherent;

    // total radiated power weighted by the channel towards UE k
    double received = 0.0;
    for (int i = 0; i < K; ++i)
        for (int l = 0; l < L; ++l)
            if (clusters.is_active(l, i)) received += rho.rho(l, i) * beta(l, k);

    // coherent pilot contamination from UEs sharing k's pilot
    double contamination = 0.0;
    for (int i : plan.sharing_sets[plan.pilots[k]]) {
        if (i == k) continue;
        double s = 0.0;
        for (int l = 0; l < L; ++l)
            if (clusters.is_active(l, i)) s += std::sqrt(rho.rho(l, i) * gamma(l, k));
        contamination += s * s;
    }

    return numerator / (received + N * contamination + cfg.sigma_dl2_mw);
}

double spectral_efficiency(double sinr_value, const DownlinkConfig& cfg) {
    if (sinr_value < 0.0) throw std::invalid_argument("spectral_efficiency: SINR must be >= 0");
    if (cfg.tau_d() <= 0) throw std::invalid_argument("spectral_efficiency: tau_d must be positive");
    return (static_cast<double>(cfg.tau_d()) / cfg.tau_c) * std::log2(1.0 + sinr_value);
}

std::vector<double> per_ue_se(const ClusterAssignment& clusters, const Matrix& beta,
                              const Matrix& gamma, const PilotPlan& plan, const DownlinkConfig& cfg) {
    const PowerAllocation rho = allocate_power(beta, clusters, cfg.rho_max_mw);
    std::vector<double> se(clusters.K);
    for (int k = 0; k < clusters.K; ++k)
        se[k] = spectral_efficiency(sinr(k, clusters, rho, beta, gamma, plan, cfg), cfg);
    return se;
}

double objective(const ClusterAssignment& clusters, const Matrix& beta, const Matrix& gamma,
                 const PilotPlan& plan, const DownlinkConfig& cfg) {
    for (int k = 0; k < clusters.K; ++k)
        if (!clusters.column_served(k))
            throw std::runtime_error("objective: UE " + std::to_string(k) + " has no serving AP");
    const std::vector<double> se = per_ue_se(clusters, beta, gamma, plan, cfg);
    double sum = 0.0;
    for (double s : se) sum += s;
    return sum - cfg.lambda * clusters.connection_count();
}

} // namespace cfm
