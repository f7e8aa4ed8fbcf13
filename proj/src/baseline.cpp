#include "cfm/baseline.hpp"

#include <stdexcept>

namespace cfm {

ClusterAssignment baseline_clusters(const Matrix& beta, const PilotPlan& plan) {
    const int L = beta.rows;
    const int K = beta.cols;
    if (static_cast<int>(plan.pilots.size()) != K)
        throw std::invalid_argument("baseline_clusters: plan/beta K mismatch");
    ClusterAssignment clusters(L, K);
    for (int l = 0; l < L; ++l) {
        for (int t = 0; t < plan.tau_p; ++t) {
            const auto& sharers = plan.sharing_sets[t];
            if (sharers.empty()) continue;
            int winner = sharers[0];
            for (int i : sharers)
                if (beta(l, i) > beta(l, winner)) winner = i;
            clusters.set(l, winner, true);
        }
    }
    for (int k = 0; k < K; ++k) clusters.set(plan.masters[k], k, true);
    return clusters;
}

ClusterAssignment master_only_clusters(const std::vector<int>& masters, int L) {
    ClusterAssignment clusters(L, static_cast<int>(masters.size()));
    for (int k = 0; k < clusters.K; ++k) clusters.set(masters[k], k, true);
    return clusters;
}

} // namespace cfm
