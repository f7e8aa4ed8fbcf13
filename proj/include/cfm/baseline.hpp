/**
 * @file baseline.hpp
 * @brief Reference clustering heuristic: every AP serves, for each occupied
 * pilot, the UE with the strongest channel to it.
 */
#pragma once

#include "cfm/access.hpp"
#include "cfm/downlink.hpp"

namespace cfm {

/// Per-pilot winner activation plus forced master links, so every UE is
/// guaranteed at least one serving AP. Ties go to the lowest UE index.
ClusterAssignment baseline_clusters(const Matrix& beta, const PilotPlan& plan);

/// Master-link-only assignment; the degenerate comparison point.
ClusterAssignment master_only_clusters(const std::vector<int>& masters, int L);

} // namespace cfm
