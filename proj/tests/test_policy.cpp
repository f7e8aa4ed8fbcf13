#include <doctest.h>

#include "cfm/policy.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace cfm;

namespace {

// plain scalar-loop re-computation of one cell, independent of the library path
void cell_oracle(const PolicyParams& p, const std::vector<double>& xi,
                 const std::vector<double>& v_prev, const std::vector<double>& z_prev,
                 std::vector<double>& v_out, std::vector<double>& z_out) {
    const int q = p.layout.q;
    const int d = p.layout.input_dim();
    auto affine = [&](const double* w, const double* u, const double* b, int row) {
        double acc = b[row];
        for (int c = 0; c < d; ++c) acc += w[row * d + c] * xi[c];
        for (int c = 0; c < q; ++c) acc += u[row * q + c] * v_prev[c];
        return acc;
    };
    auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    v_out.resize(q);
    z_out.resize(q);
    for (int j = 0; j < q; ++j) {
        const double f = sig(affine(p.w(kForget), p.u(kForget), p.b(kForget), j));
        const double i = sig(affine(p.w(kInput), p.u(kInput), p.b(kInput), j));
        const double o = sig(affine(p.w(kOutput), p.u(kOutput), p.b(kOutput), j));
        const double c = std::tanh(affine(p.w(kCell), p.u(kCell), p.b(kCell), j));
        z_out[j] = f * z_prev[j] + i * c;
        v_out[j] = o * std::tanh(z_out[j]);
    }
}

PolicyLayout tiny_layout(int q = 4, int L = 3) {
    PolicyLayout lay;
    lay.q = q;
    lay.L = L;
    lay.fc_hidden = {8};
    return lay;
}

std::vector<std::vector<double>> random_features(const PolicyLayout& lay, int K, Rng& rng) {
    std::vector<std::vector<double>> f(K);
    for (auto& xi : f) {
        xi.resize(lay.input_dim());
        for (double& x : xi) x = rng.uniform(-1.5, 1.5);
    }
    return f;
}

UEOrdering identity_ordering(int K) {
    UEOrdering o;
    o.subchains = {{}};
    for (int k = 0; k < K; ++k) {
        o.subchains[0].push_back(k);
        o.flat.push_back(k);
    }
    return o;
}

} // namespace

TEST_CASE("parameter initialization") {
    const PolicyLayout lay = tiny_layout(8, 4);
    Rng rng(1);
    const PolicyParams p = init_policy_params(lay, rng);
    CHECK(p.flat.size() == lay.total());
    const double wb = 1.0 / std::sqrt(static_cast<double>(lay.input_dim()));
    for (size_t i = 0; i < static_cast<size_t>(lay.q) * lay.input_dim(); ++i)
        CHECK(std::abs(p.w(kForget)[i]) <= wb);
    for (int j = 0; j < lay.q; ++j) {
        CHECK(p.b(kForget)[j] == 1.0);
        CHECK(p.b(kInput)[j] == 0.0);
        CHECK(p.b(kCell)[j] == 0.0);
    }
    Rng rng2(1);
    const PolicyParams p2 = init_policy_params(lay, rng2);
    CHECK(p.flat == p2.flat);
}

TEST_CASE("feature normalization and assembly") {
    std::vector<Matrix> samples;
    Matrix b1(2, 2);
    b1(0, 0) = 1e-10;
    b1(0, 1) = 1e-8;
    b1(1, 0) = 1e-9;
    b1(1, 1) = 1e-11;
    samples.push_back(b1);
    const FeatureNorm norm = fit_feature_norm(samples, 700.0);
    // row 0 over {-100, -80} dB: mean -90, std 10
    CHECK(norm.mean_db[0] == doctest::Approx(-90.0).epsilon(1e-12));
    CHECK(norm.std_db[0] == doctest::Approx(10.0).epsilon(1e-12));

    UEDrop drop;
    drop.K = 2;
    drop.ue_positions = {{0.0, 0.0}, {700.0, 700.0}};
    const auto features = build_features(b1, drop, norm);
    REQUIRE(features.size() == 2);
    REQUIRE(features[0].size() == 4);
    // the two gains sit exactly one std below and above the mean
    CHECK(features[0][0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(features[1][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(features[0][2] == 0.0);
    CHECK(features[0][3] == 0.0);
    CHECK(features[1][2] == 1.0);
    CHECK(features[1][3] == 1.0);

    // denormalizing recovers the dB value
    const double recovered = features[0][0] * norm.std_db[0] + norm.mean_db[0];
    CHECK(recovered == doctest::Approx(10.0 * std::log10(b1(0, 0))).epsilon(1e-9));
}

TEST_CASE("hierarchical UE ordering") {
    SUBCASE("reference example") {
        // masters (0, 1, 0), gains to masters (0.2, 0.9, 0.5): AP0 chain is
        // UE2 then UE0, AP1 chain is UE1
        Matrix beta(2, 3);
        beta(0, 0) = 0.2;
        beta(1, 1) = 0.9;
        beta(0, 2) = 0.5;
        const UEOrdering o = order_ues(beta, {0, 1, 0}, {0, 1});
        REQUIRE(o.flat.size() == 3);
        CHECK(o.flat[0] == 2);
        CHECK(o.flat[1] == 0);
        CHECK(o.flat[2] == 1);
        CHECK(o.subchains[0] == std::vector<int>{2, 0});
        CHECK(o.subchains[1] == std::vector<int>{1});
    }
    SUBCASE("single master yields a pure descending sort") {
        Matrix beta(1, 4);
        beta(0, 0) = 0.3;
        beta(0, 1) = 0.9;
        beta(0, 2) = 0.1;
        beta(0, 3) = 0.5;
        const UEOrdering o = order_ues(beta, {0, 0, 0, 0}, {0});
        CHECK(o.flat == std::vector<int>{1, 3, 0, 2});
    }
    SUBCASE("singleton") {
        Matrix beta(2, 1);
        beta(1, 0) = 0.4;
        const UEOrdering o = order_ues(beta, {1}, {0, 1});
        CHECK(o.flat == std::vector<int>{0});
        CHECK(o.subchains[0].empty());
    }
    SUBCASE("concatenation is a permutation with UEs under their masters") {
        Rng rng(2);
        Matrix beta(4, 7);
        for (double& b : beta.data) b = rng.uniform(0.0, 1.0);
        std::vector<int> masters;
        for (int k = 0; k < 7; ++k) masters.push_back(static_cast<int>(rng.below(4)));
        const UEOrdering o = order_ues(beta, masters, {2, 0, 3, 1});
        std::vector<int> seen(7, 0);
        for (int ue : o.flat) seen[ue] += 1;
        for (int c : seen) CHECK(c == 1);
        for (size_t pos = 0; pos < o.subchains.size(); ++pos)
            for (int ue : o.subchains[pos]) CHECK(masters[ue] == std::vector<int>{2, 0, 3, 1}[pos]);
    }
}

TEST_CASE("LSTM cell behavior") {
    SUBCASE("all-zero parameters") {
        const PolicyLayout lay = tiny_layout();
        PolicyParams p(lay);
        const std::vector<double> xi(lay.input_dim(), 0.7);
        const std::vector<double> zero(lay.q, 0.0);
        auto [v, z] = lstm_step(p, xi, zero, zero);
        for (double x : v) CHECK(x == 0.0);
        for (double x : z) CHECK(x == 0.0);

        // with prior cell state z0: zeta = z0/2, upsilon = tanh(zeta)/2
        std::vector<double> z_prev = {0.3, -0.8, 1.2, 0.05};
        auto [v2, z2] = lstm_step(p, xi, zero, z_prev);
        for (int j = 0; j < lay.q; ++j) {
            CHECK(z2[j] == doctest::Approx(0.5 * z_prev[j]).epsilon(1e-15));
            CHECK(v2[j] == doctest::Approx(0.5 * std::tanh(0.5 * z_prev[j])).epsilon(1e-15));
        }
    }
    SUBCASE("matches the scalar-loop oracle") {
        const PolicyLayout lay = tiny_layout(5, 4);
        Rng rng(3);
        const PolicyParams p = init_policy_params(lay, rng);
        std::vector<double> xi(lay.input_dim()), v_prev(lay.q), z_prev(lay.q);
        for (double& x : xi) x = rng.uniform(-2.0, 2.0);
        for (double& x : v_prev) x = rng.uniform(-1.0, 1.0);
        for (double& x : z_prev) x = rng.uniform(-1.0, 1.0);
        auto [v, z] = lstm_step(p, xi, v_prev, z_prev);
        std::vector<double> v_ref, z_ref;
        cell_oracle(p, xi, v_prev, z_prev, v_ref, z_ref);
        for (int j = 0; j < lay.q; ++j) {
            CHECK(v[j] == doctest::Approx(v_ref[j]).epsilon(1e-12));
            CHECK(z[j] == doctest::Approx(z_ref[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward chain") {
    SUBCASE("all-zero parameters emit one half everywhere") {
        const PolicyLayout lay = tiny_layout();
        PolicyParams p(lay);
        Rng rng(4);
        const auto features = random_features(lay, 3, rng);
        const Matrix probs = forward(p, identity_ordering(3), features);
        for (double v : probs.data) CHECK(v == 0.5);
    }
    SUBCASE("probabilities stay strictly inside (0,1) and repeat bitwise") {
        const PolicyLayout lay = tiny_layout(6, 4);
        Rng rng(5);
        const PolicyParams p = init_policy_params(lay, rng);
        const auto features = random_features(lay, 5, rng);
        const Matrix a = forward(p, identity_ordering(5), features);
        const Matrix b = forward(p, identity_ordering(5), features);
        for (double v : a.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
        CHECK(a.data == b.data);
    }
    SUBCASE("causality along the chain") {
        const PolicyLayout lay = tiny_layout(6, 4);
        Rng rng(6);
        const PolicyParams p = init_policy_params(lay, rng);
        auto features = random_features(lay, 4, rng);
        const Matrix base = forward(p, identity_ordering(4), features);
        // perturbing the last UE leaves all earlier rows untouched
        features[3][0] += 0.37;
        const Matrix late = forward(p, identity_ordering(4), features);
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < lay.L; ++l) CHECK(late(k, l) == base(k, l));
        CHECK(late(3, 0) != base(3, 0));
        // perturbing the first UE reaches the following rows
        features[3][0] -= 0.37;
        features[0][0] += 0.37;
        const Matrix early = forward(p, identity_ordering(4), features);
        CHECK(early(1, 0) != base(1, 0));
    }
    SUBCASE("relabeling UEs permutes the rows and nothing else") {
        const PolicyLayout lay = tiny_layout(5, 3);
        Rng rng(7);
        const PolicyParams p = init_policy_params(lay, rng);
        const auto features = random_features(lay, 3, rng);
        const Matrix base = forward(p, identity_ordering(3), features);
        // relabel (0,1,2) -> (2,0,1) while preserving the chain semantics
        const int relabel[3] = {2, 0, 1};
        std::vector<std::vector<double>> features2(3);
        for (int k = 0; k < 3; ++k) features2[relabel[k]] = features[k];
        UEOrdering ordering2;
        ordering2.subchains = {{relabel[0], relabel[1], relabel[2]}};
        ordering2.flat = {relabel[0], relabel[1], relabel[2]};
        const Matrix perm = forward(p, ordering2, features2);
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < lay.L; ++l) CHECK(perm(relabel[k], l) == base(k, l));
    }
    SUBCASE("an AP without mastered UEs changes nothing") {
        const PolicyLayout lay = tiny_layout(5, 3);
        Rng rng(8);
        const PolicyParams p = init_policy_params(lay, rng);
        Matrix beta(3, 3);
        for (double& b : beta.data) b = rng.uniform(0.1, 1.0);
        const std::vector<int> masters = {0, 0, 2}; // AP 1 masters nobody
        const auto features = random_features(lay, 3, rng);
        const UEOrdering with_gap = order_ues(beta, masters, {0, 1, 2});
        const UEOrdering without = order_ues(beta, masters, {0, 2});
        CHECK(with_gap.flat == without.flat);
        const Matrix a = forward(p, with_gap, features);
        const Matrix b = forward(p, without, features);
        CHECK(a.data == b.data);
    }
}

TEST_CASE("sampling and thresholding decisions") {
    SUBCASE("near-one probabilities activate everything at near-zero log-probability") {
        Matrix probs(2, 3, 1.0 - 1e-9);
        Rng rng(9);
        const auto [clusters, logp] = sample_clusters(probs, {0, 1}, rng);
        CHECK(clusters.connection_count() == 6);
        CHECK(std::abs(logp) < 1e-6);
    }
    SUBCASE("half probabilities with one UE and a forced master") {
        Matrix probs(1, 3, 0.5);
        Rng rng(10);
        const auto [clusters, logp] = sample_clusters(probs, {0}, rng);
        CHECK(clusters.is_active(0, 0));
        CHECK(logp == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-15));
    }
    SUBCASE("master probability never enters the log-probability") {
        Matrix probs(1, 3, 0.5);
        probs(0, 0) = 1e-12; // would dominate the sum if it were counted
        Rng rng(11);
        const auto [clusters, logp] = sample_clusters(probs, {0}, rng);
        CHECK(clusters.is_active(0, 0));
        CHECK(std::abs(logp) <= 2.0 * std::abs(std::log(0.5)) + 1e-12);
    }
    SUBCASE("empirical activation frequency tracks the probabilities") {
        Matrix probs(1, 3);
        probs(0, 0) = 0.5; // master, forced anyway
        probs(0, 1) = 0.3;
        probs(0, 2) = 0.7;
        Rng rng(12);
        int c1 = 0, c2 = 0;
        const int n = 100000;
        for (int t = 0; t < n; ++t) {
            const auto [clusters, logp] = sample_clusters(probs, {0}, rng);
            (void)logp;
            c1 += clusters.is_active(1, 0);
            c2 += clusters.is_active(2, 0);
        }
        CHECK(std::abs(c1 / double(n) - 0.3) < 0.01);
        CHECK(std::abs(c2 / double(n) - 0.7) < 0.01);
    }
    SUBCASE("saturated probabilities are rejected") {
        Matrix probs(1, 2, 0.5);
        probs(0, 1) = 1.0;
        Rng rng(13);
        CHECK_THROWS_AS(sample_clusters(probs, {0}, rng), std::runtime_error);
    }
    SUBCASE("threshold rule is strict and keeps masters") {
        Matrix probs(2, 3, 0.5); // exactly one half: never activated
        probs(0, 1) = 0.9;
        probs(1, 2) = 0.500001;
        const ClusterAssignment c = threshold_clusters(probs, {0, 1});
        CHECK(c.is_active(0, 0));  // master of UE 0
        CHECK(c.is_active(1, 0));  // above a half
        CHECK(c.is_active(1, 1));  // master of UE 1
        CHECK(c.is_active(2, 1));  // barely above a half
        CHECK(!c.is_active(2, 0));
        CHECK(!c.is_active(0, 1));
        CHECK(c.every_ue_served());
    }
}

TEST_CASE("cluster log-probability agrees with the sampler") {
    const PolicyLayout lay = tiny_layout(5, 4);
    Rng rng(14);
    const PolicyParams p = init_policy_params(lay, rng);
    const auto features = random_features(lay, 3, rng);
    const Matrix probs = forward(p, identity_ordering(3), features);
    const std::vector<int> masters = {0, 2, 1};
    const auto [clusters, logp] = sample_clusters(probs, masters, rng);
    CHECK(cluster_log_prob(probs, clusters, masters) == doctest::Approx(logp).epsilon(1e-12));
}

TEST_CASE("checkpoint round-trip and rejection") {
    const PolicyLayout lay = tiny_layout(6, 5);
    Rng rng(15);
    Checkpoint ck;
    ck.params = init_policy_params(lay, rng);
    ck.norm.mean_db = {-90, -95, -92, -88, -99};
    ck.norm.std_db = {9, 11, 10, 8, 12};
    ck.norm.area_side = 700.0;
    ck.lineage = "seed 15, unit test";
    const std::string path = (std::filesystem::temp_directory_path() / "cfm_test_ckpt.bin").string();
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    CHECK(back.params.layout == lay);
    CHECK(back.params.flat == ck.params.flat);
    CHECK(back.norm.mean_db == ck.norm.mean_db);
    CHECK(back.norm.std_db == ck.norm.std_db);
    CHECK(back.norm.area_side == ck.norm.area_side);
    CHECK(back.lineage == ck.lineage);

    // corrupt the magic: refused
    {
        std::FILE* f = std::fopen(path.c_str(), "r+b");
        REQUIRE(f != nullptr);
        std::fputc('X', f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    std::filesystem::remove(path);
}
