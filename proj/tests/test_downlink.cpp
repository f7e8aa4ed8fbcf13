#include <doctest.h>

#include "cfm/downlink.hpp"

#include <cmath>
#include <numeric>

using namespace cfm;

namespace {

// One-off transcription of the SINR display with naive nested loops, kept
// deliberately separate from the library implementation.
double sinr_oracle(int k, const std::vector<std::vector<int>>& serving, // serving[i] = APs of UE i
                   const Matrix& rho, const Matrix& beta, const Matrix& gamma,
                   const std::vector<int>& pilots, int N, double sigma2) {
    const int K = beta.cols;
    double coh = 0.0;
    for (int l : serving[k]) coh += std::sqrt(rho(l, k) * gamma(l, k));
    const double num = N * coh * coh;
    double den = sigma2;
    for (int i = 0; i < K; ++i)
        for (int l : serving[i]) den += rho(l, i) * beta(l, k);
    for (int i = 0; i < K; ++i) {
        if (i == k || pilots[i] != pilots[k]) continue;
        double s = 0.0;
        for (int l : serving[i]) s += std::sqrt(rho(l, i) * gamma(l, k));
        den += N * s * s;
    }
    return num / den;
}

struct TwoByTwo {
    Matrix beta{2, 2};
    Matrix gamma{2, 2};
    PilotPlan plan;
    DownlinkConfig cfg;
    ClusterAssignment clusters{2, 2};
};

// the frozen 2-AP / 2-UE instance used as the brute-force reference
TwoByTwo make_two_by_two(bool shared_pilot) {
    TwoByTwo t;
    t.beta(0, 0) = 2e-9;
    t.beta(0, 1) = 5e-10;
    t.beta(1, 0) = 4e-10;
    t.beta(1, 1) = 1e-9;
    const double eta = 100.0;
    const double s2 = std::pow(10.0, -9.4);
    if (shared_pilot) {
        t.plan.tau_p = 1;
        t.plan.pilots = {0, 0};
        t.plan.sharing_sets = {{0, 1}};
    } else {
        t.plan.tau_p = 2;
        t.plan.pilots = {0, 1};
        t.plan.sharing_sets = {{0}, {1}};
    }
    t.plan.masters = {0, 1};
    for (int l = 0; l < 2; ++l)
        for (int k = 0; k < 2; ++k) {
            double den = s2;
            for (int i : t.plan.sharing_sets[t.plan.pilots[k]]) den += t.plan.tau_p * eta * t.beta(l, i);
            t.gamma(l, k) = t.plan.tau_p * eta * t.beta(l, k) * t.beta(l, k) / den;
        }
    t.cfg.rho_max_mw = 200.0;
    t.cfg.sigma_dl2_mw = s2;
    t.cfg.N = 4;
    t.cfg.tau_c = 200;
    t.cfg.tau_p = t.plan.tau_p;
    t.cfg.tau_u = 0;
    t.cfg.lambda = 0.04;
    for (int l = 0; l < 2; ++l)
        for (int k = 0; k < 2; ++k) t.clusters.set(l, k, true);
    return t;
}

} // namespace

TEST_CASE("power allocation splits by square-root weights") {
    SUBCASE("a single served UE takes the whole budget") {
        Matrix beta(1, 1);
        beta(0, 0) = 1e-10;
        ClusterAssignment c(1, 1);
        c.set(0, 0, true);
        const PowerAllocation p = allocate_power(beta, c, 200.0);
        CHECK(p.rho(0, 0) == doctest::Approx(200.0).epsilon(1e-15));
    }
    SUBCASE("equal gains split evenly") {
        Matrix beta(1, 2, 4e-10);
        ClusterAssignment c(1, 2);
        c.set(0, 0, true);
        c.set(0, 1, true);
        const PowerAllocation p = allocate_power(beta, c, 200.0);
        CHECK(p.rho(0, 0) == doctest::Approx(100.0).epsilon(1e-13));
        CHECK(p.rho(0, 1) == doctest::Approx(100.0).epsilon(1e-13));
    }
    SUBCASE("4:1 gains split 2:1") {
        Matrix beta(1, 2);
        beta(0, 0) = 4e-9;
        beta(0, 1) = 1e-9;
        ClusterAssignment c(1, 2);
        c.set(0, 0, true);
        c.set(0, 1, true);
        const PowerAllocation p = allocate_power(beta, c, 200.0);
        CHECK(p.rho(0, 0) == doctest::Approx(200.0 * 2.0 / 3.0).epsilon(1e-13));
        CHECK(p.rho(0, 1) == doctest::Approx(200.0 / 3.0).epsilon(1e-13));
    }
    SUBCASE("active rows sum to the budget, inactive links get nothing") {
        Rng rng(1);
        for (int rep = 0; rep < 10; ++rep) {
            const int L = 4, K = 5;
            Matrix beta(L, K);
            for (double& b : beta.data) b = std::pow(10.0, rng.uniform(-12.0, -8.0));
            ClusterAssignment c(L, K);
            for (int l = 0; l < L; ++l)
                for (int k = 0; k < K; ++k) c.set(l, k, rng.bernoulli(0.5));
            const PowerAllocation p = allocate_power(beta, c, 200.0);
            for (int l = 0; l < L; ++l) {
                double sum = 0.0;
                bool any = false;
                for (int k = 0; k < K; ++k) {
                    if (c.is_active(l, k)) {
                        any = true;
                        CHECK(p.rho(l, k) > 0.0);
                    } else {
                        CHECK(p.rho(l, k) == 0.0);
                    }
                    sum += p.rho(l, k);
                }
                if (any) CHECK(std::abs(sum - 200.0) / 200.0 <= 1e-12);
            }
        }
    }
}

TEST_CASE("single-UE single-AP SINR collapses to the textbook ratio") {
    Matrix beta(1, 1);
    beta(0, 0) = 2e-9;
    Matrix gamma(1, 1);
    gamma(0, 0) = 1.9e-9;
    PilotPlan plan;
    plan.tau_p = 1;
    plan.masters = {0};
    plan.pilots = {0};
    plan.sharing_sets = {{0}};
    DownlinkConfig cfg;
    cfg.rho_max_mw = 200.0;
    cfg.sigma_dl2_mw = std::pow(10.0, -9.4);
    cfg.N = 4;
    cfg.tau_c = 200;
    cfg.tau_p = 1;
    ClusterAssignment c(1, 1);
    c.set(0, 0, true);
    const PowerAllocation rho = allocate_power(beta, c, cfg.rho_max_mw);
    const double got = sinr(0, c, rho, beta, gamma, plan, cfg);
    const double expected = 4.0 * 200.0 * gamma(0, 0) / (200.0 * beta(0, 0) + cfg.sigma_dl2_mw);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("SINR matches the independent oracle on the 2x2 instance") {
    for (const bool shared : {false, true}) {
        CAPTURE(shared);
        TwoByTwo t = make_two_by_two(shared);
        const PowerAllocation rho = allocate_power(t.beta, t.clusters, t.cfg.rho_max_mw);
        const std::vector<std::vector<int>> serving = {{0, 1}, {0, 1}};
        for (int k = 0; k < 2; ++k) {
            const double got = sinr(k, t.clusters, rho, t.beta, t.gamma, t.plan, t.cfg);
            const double want =
                sinr_oracle(k, serving, rho.rho, t.beta, t.gamma, t.plan.pilots, t.cfg.N, t.cfg.sigma_dl2_mw);
            CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
        // frozen references computed with the display before the build
        if (!shared) {
            const double s0 = sinr(0, t.clusters, rho, t.beta, t.gamma, t.plan, t.cfg);
            const double s1 = sinr(1, t.clusters, rho, t.beta, t.gamma, t.plan, t.cfg);
            CHECK(s0 == doctest::Approx(3.9844139913792676).epsilon(1e-9));
            CHECK(s1 == doctest::Approx(3.7670256039361862).epsilon(1e-9));
        } else {
            const double s0 = sinr(0, t.clusters, rho, t.beta, t.gamma, t.plan, t.cfg);
            const double s1 = sinr(1, t.clusters, rho, t.beta, t.gamma, t.plan, t.cfg);
            CHECK(s0 == doctest::Approx(0.971296694028355).epsilon(1e-9));
            CHECK(s1 == doctest::Approx(0.7184567270447392).epsilon(1e-9));
        }
    }
}

TEST_CASE("a zero-power AP changes nothing") {
    TwoByTwo t = make_two_by_two(true);
    ClusterAssignment narrow(2, 2);
    narrow.set(0, 0, true);
    narrow.set(1, 1, true);
    PowerAllocation rho = allocate_power(t.beta, narrow, t.cfg.rho_max_mw);
    const double before0 = sinr(0, narrow, rho, t.beta, t.gamma, t.plan, t.cfg);
    const double before1 = sinr(1, narrow, rho, t.beta, t.gamma, t.plan, t.cfg);
    // enroll the other AP in each cluster but leave its power at zero
    ClusterAssignment wide = narrow;
    wide.set(1, 0, true);
    wide.set(0, 1, true);
    CHECK(sinr(0, wide, rho, t.beta, t.gamma, t.plan, t.cfg) == before0);
    CHECK(sinr(1, wide, rho, t.beta, t.gamma, t.plan, t.cfg) == before1);
}

TEST_CASE("spectral efficiency pre-log factors") {
    DownlinkConfig cfg;
    cfg.tau_c = 200;
    cfg.tau_p = 10;
    cfg.tau_u = 0;
    CHECK(spectral_efficiency(0.0, cfg) == 0.0);
    CHECK(spectral_efficiency(1.0, cfg) == doctest::Approx(0.95).epsilon(1e-12));
    DownlinkConfig cfg3 = cfg;
    cfg3.tau_p = 3;
    CHECK(spectral_efficiency(1.0, cfg3) / spectral_efficiency(1.0, cfg) ==
          doctest::Approx(197.0 / 190.0).epsilon(1e-12));
    CHECK_THROWS_AS(spectral_efficiency(-0.5, cfg), std::invalid_argument);
}

TEST_CASE("objective arithmetic and constraints") {
    TwoByTwo t = make_two_by_two(false);
    SUBCASE("zero penalty leaves the plain SE sum") {
        DownlinkConfig free = t.cfg;
        free.lambda = 0.0;
        const auto se = per_ue_se(t.clusters, t.beta, t.gamma, t.plan, free);
        const double sum = std::accumulate(se.begin(), se.end(), 0.0);
        CHECK(objective(t.clusters, t.beta, t.gamma, t.plan, free) == doctest::Approx(sum).epsilon(1e-12));
    }
    SUBCASE("objective equals SE sum minus lambda per link") {
        const auto se = per_ue_se(t.clusters, t.beta, t.gamma, t.plan, t.cfg);
        const double sum = std::accumulate(se.begin(), se.end(), 0.0);
        CHECK(objective(t.clusters, t.beta, t.gamma, t.plan, t.cfg) ==
              doctest::Approx(sum - 0.04 * 4).epsilon(1e-12));
    }
    SUBCASE("an SE-neutral extra link costs exactly lambda") {
        // a vanishing channel gain draws no power and moves no SINR, so the
        // whole objective shift is the penalty
        Matrix beta(2, 2);
        beta(0, 0) = 2e-9;
        beta(0, 1) = 5e-10;
        beta(1, 0) = 1e-300;
        beta(1, 1) = 1e-9;
        Matrix gamma = t.gamma;
        gamma(1, 0) = 1e-300;
        ClusterAssignment base(2, 2);
        base.set(0, 0, true);
        base.set(0, 1, true);
        base.set(1, 1, true);
        ClusterAssignment extra = base;
        extra.set(1, 0, true);
        const double before = objective(base, beta, gamma, t.plan, t.cfg);
        const double after = objective(extra, beta, gamma, t.plan, t.cfg);
        CHECK(before - after == doctest::Approx(t.cfg.lambda).epsilon(1e-9));
    }
    SUBCASE("an unserved UE is rejected") {
        ClusterAssignment bad(2, 2);
        bad.set(0, 0, true);
        CHECK_THROWS_AS(objective(bad, t.beta, t.gamma, t.plan, t.cfg), std::runtime_error);
    }
}

TEST_CASE("SINR is invariant under a consistent UE relabeling") {
    TwoByTwo t = make_two_by_two(true);
    const PowerAllocation rho = allocate_power(t.beta, t.clusters, t.cfg.rho_max_mw);
    const double s0 = sinr(0, t.clusters, rho, t.beta, t.gamma, t.plan, t.cfg);

    // swap the two UEs everywhere
    TwoByTwo sw = t;
    for (int l = 0; l < 2; ++l) {
        std::swap(sw.beta(l, 0), sw.beta(l, 1));
        std::swap(sw.gamma(l, 0), sw.gamma(l, 1));
    }
    sw.plan.masters = {1, 0};
    const PowerAllocation rho_sw = allocate_power(sw.beta, sw.clusters, sw.cfg.rho_max_mw);
    const double s1 = sinr(1, sw.clusters, rho_sw, sw.beta, sw.gamma, sw.plan, sw.cfg);
    CHECK(s1 == doctest::Approx(s0).epsilon(1e-12));
}

TEST_CASE("SE grows with the UE's own estimation quality") {
    TwoByTwo t = make_two_by_two(false); // distinct pilots: no contamination path
    const auto se_before = per_ue_se(t.clusters, t.beta, t.gamma, t.plan, t.cfg);
    Matrix better = t.gamma;
    better(0, 0) *= 1.01;
    const auto se_after = per_ue_se(t.clusters, t.beta, better, t.plan, t.cfg);
    CHECK(se_after[0] > se_before[0]);
    CHECK(se_after[1] == se_before[1]);
}

TEST_CASE("for one UE the best single serving AP is the strongest one") {
    Rng rng(2);
    for (int rep = 0; rep < 10; ++rep) {
        const int L = 5;
        Matrix beta(L, 1);
        for (double& b : beta.data) b = std::pow(10.0, rng.uniform(-12.0, -8.0));
        PilotPlan plan;
        plan.tau_p = 1;
        plan.masters = {0};
        plan.pilots = {0};
        plan.sharing_sets = {{0}};
        UplinkConfig ul{100.0, std::pow(10.0, -9.4), 1, 200};
        const Matrix gamma = compute_gamma(beta, plan, ul);
        DownlinkConfig cfg;
        cfg.rho_max_mw = 200.0;
        cfg.sigma_dl2_mw = ul.sigma_ul2_mw;
        cfg.N = 4;
        cfg.tau_c = 200;
        cfg.tau_p = 1;
        cfg.lambda = 0.04;
        int best_l = -1;
        double best = -1e300;
        for (int l = 0; l < L; ++l) {
            ClusterAssignment c(L, 1);
            c.set(l, 0, true);
            const double obj = objective(c, beta, gamma, plan, cfg);
            if (obj > best) {
                best = obj;
                best_l = l;
            }
        }
        int strongest = 0;
        for (int l = 1; l < L; ++l)
            if (beta(l, 0) > beta(strongest, 0)) strongest = l;
        CHECK(best_l == strongest);
    }
}
