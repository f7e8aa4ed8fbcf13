#include "cfm/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace cfm {

std::vector<double> grad_log_prob_traced(const PolicyParams& params, const ForwardTrace& trace,
                                         const std::vector<std::vector<double>>& features,
                                         const ClusterAssignment& clusters,
                                         const std::vector<int>& masters) {
    const PolicyLayout& lay = params.layout;
    const int q = lay.q;
    const int n_fc = lay.n_fc();
    std::vector<double> grad(lay.total(), 0.0);

    // per-layer activation offsets inside CellTrace::fc_act
    std::vector<size_t> act_off(n_fc);
    size_t off = 0;
    for (int m = 0; m < n_fc; ++m) {
        act_off[m] = off;
        off += lay.fc_in(m);
    }

    std::vector<double> dv_carry(q, 0.0), dz_carry(q, 0.0);
    std::vector<double> dz_f(q), dz_i(q), dz_o(q), dz_c(q), dzeta(q), dv_total(q);
    std::vector<double> dz_cur, dz_next;

    for (int pos = static_cast<int>(trace.cells.size()) - 1; pos >= 0; --pos) {
        const CellTrace& ct = trace.cells[pos];
        const int ue = ct.ue;
        const auto& xi = features[ue];

        // head output: d/dz of the Bernoulli log-likelihood at a sigmoid unit
        // is (a - p); the forced master link carries no gradient
        dz_cur.assign(lay.L, 0.0);
        for (int l = 0; l < lay.L; ++l) {
            if (l == masters[ue]) continue;
            const double p = ct.probs[l];
            if (!(p > 0.0 && p < 1.0))
                throw std::runtime_error("grad_log_prob: probability saturated at 0 or 1");
            dz_cur[l] = (clusters.is_active(l, ue) ? 1.0 : 0.0) - p;
        }

        // FC head, top down
        for (int m = n_fc - 1; m >= 0; --m) {
            const int in = lay.fc_in(m);
            const int out = lay.fc_out(m);
            const double* a_in = ct.fc_act.data() + act_off[m];
            outer_accum(grad.data() + lay.fc_w_off(m), out, in, dz_cur.data(), a_in);
            double* gb = grad.data() + lay.fc_b_off(m);
            for (int r = 0; r < out; ++r) gb[r] += dz_cur[r];
            dz_next.assign(in, 0.0);
            matTvec_accum(params.fc_w(m), out, in, dz_cur.data(), dz_next.data());
            if (m > 0) {
                // entering activation is the rectified output of layer m-1
                for (int j = 0; j < in; ++j)
                    if (a_in[j] <= 0.0) dz_next[j] = 0.0;
            }
            dz_cur.swap(dz_next);
        }

        // recurrent cell, with the contribution flowing in from the next cell
        for (int j = 0; j < q; ++j) dv_total[j] = dz_cur[j] + dv_carry[j];
        for (int j = 0; j < q; ++j) {
            const double tz = ct.tanh_zeta[j];
            const double dout = dv_total[j] * tz;
            dz_o[j] = dout * ct.o[j] * (1.0 - ct.o[j]);
            dzeta[j] = dz_carry[j] + dv_total[j] * ct.o[j] * (1.0 - tz * tz);
            const double df = dzeta[j] * ct.z_prev[j];
            dz_f[j] = df * ct.f[j] * (1.0 - ct.f[j]);
            const double di = dzeta[j] * ct.c[j];
            dz_i[j] = di * ct.i[j] * (1.0 - ct.i[j]);
            const double dc = dzeta[j] * ct.i[j];
            dz_c[j] = dc * (1.0 - ct.c[j] * ct.c[j]);
            dz_carry[j] = dzeta[j] * ct.f[j];
        }
        const double* dz_gate[4] = {dz_f.data(), dz_i.data(), dz_o.data(), dz_c.data()};
        std::fill(dv_carry.begin(), dv_carry.end(), 0.0);
        for (int g = 0; g < 4; ++g) {
            outer_accum(grad.data() + lay.w_off(g), q, lay.input_dim(), dz_gate[g], xi.data());
            outer_accum(grad.data() + lay.u_off(g), q, q, dz_gate[g], ct.v_prev.data());
            double* gb = grad.data() + lay.b_off(g);
            for (int j = 0; j < q; ++j) gb[j] += dz_gate[g][j];
            matTvec_accum(params.u(g), q, q, dz_gate[g], dv_carry.data());
        }
    }
    return grad;
}

std::vector<double> grad_log_prob(const PolicyParams& params, const UEOrdering& ordering,
                                  const std::vector<std::vector<double>>& features,
                                  const ClusterAssignment& clusters,
                                  const std::vector<int>& masters) {
    if (ordering.flat.empty()) throw std::invalid_argument("grad_log_prob: empty ordering");
    ForwardTrace trace;
    forward(params, ordering, features, &trace);
    return grad_log_prob_traced(params, trace, features, clusters, masters);
}

void adam_update(PolicyParams& params, const std::vector<double>& grads, OptimizerState& opt,
                 double learning_rate) {
    const size_t n = params.flat.size();
    if (grads.size() != n || opt.m.size() != n || opt.v.size() != n)
        throw std::invalid_argument("adam_update: shape mismatch");
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    opt.t += 1;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(opt.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(opt.t));
    for (size_t j = 0; j < n; ++j) {
        opt.m[j] = beta1 * opt.m[j] + (1.0 - beta1) * grads[j];
        opt.v[j] = beta2 * opt.v[j] + (1.0 - beta2) * grads[j] * grads[j];
        const double mhat = opt.m[j] / c1;
        const double vhat = opt.v[j] / c2;
        params.flat[j] += learning_rate * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace {

// Everything one batch element contributes to the gradient pass.
struct BatchElement {
    std::vector<std::vector<double>> features;
    std::vector<int> masters;
    ClusterAssignment clusters;
    ForwardTrace trace;
    double reward = 0.0;
};

} // namespace

BatchStats reinforce_step(PolicyParams& params, OptimizerState& opt, const Scenario& scenario,
                          const UEDrop& drop, const std::vector<LargeScaleRealization>& batch,
                          const UplinkConfig& ul, const DownlinkConfig& dl,
                          const FeatureNorm& norm, double learning_rate,
                          bool variance_reduction, Rng& rng) {
    if (batch.empty()) throw std::invalid_argument("reinforce_step: empty batch");
    const size_t n = params.flat.size();

    std::vector<BatchElement> elements;
    elements.reserve(batch.size());
    double reward_mean = 0.0; // running mean: exact when every reward is equal
    double sum_se = 0.0, sum_conn = 0.0, sum_r = 0.0;

    for (size_t b = 0; b < batch.size(); ++b) {
        const LargeScaleRealization& ls = batch[b];
        BatchElement el;
        el.masters = compute_masters(ls.beta);
        const PilotPlan plan = assign_pilots(ls.beta, el.masters, ul.tau_p);
        const Matrix gamma = compute_gamma(ls.beta, plan, ul);
        el.features = build_features(ls.beta, drop, norm);
        const UEOrdering ordering = order_ues(ls.beta, el.masters, scenario.ap_order);

        const Matrix probs = forward(params, ordering, el.features, &el.trace);
        auto [clusters, logp] = sample_clusters(probs, el.masters, rng);
        (void)logp;
        el.clusters = std::move(clusters);

        const std::vector<double> se = per_ue_se(el.clusters, ls.beta, gamma, plan, dl);
        const double se_sum = std::accumulate(se.begin(), se.end(), 0.0);
        const int conn = el.clusters.connection_count();
        el.reward = se_sum - dl.lambda * conn;

        reward_mean += (el.reward - reward_mean) / static_cast<double>(b + 1);
        sum_r += el.reward;
        sum_se += se_sum;
        sum_conn += conn;
        elements.push_back(std::move(el));
    }

    // (1/B) sum_b (R_b - Rbar) grad log p_b, centered term by term so that a
    // batch of equal rewards yields an exactly zero estimate
    const double rbar = variance_reduction ? reward_mean : 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::vector<double> grad_est(n, 0.0);
    for (const BatchElement& el : elements) {
        const double w = el.reward - rbar;
        if (w == 0.0) continue;
        const std::vector<double> g =
            grad_log_prob_traced(params, el.trace, el.features, el.clusters, el.masters);
        for (size_t j = 0; j < n; ++j) grad_est[j] += w * g[j];
    }
    for (double& x : grad_est) x *= inv_b;
    adam_update(params, grad_est, opt, learning_rate);

    const double bsz = static_cast<double>(batch.size());
    return {sum_r / bsz, sum_se / bsz, sum_conn / bsz};
}

TrainResult train(const Scenario& scenario, const std::vector<UEDrop>& train_drops,
                  const ChannelConfig& chan, const UplinkConfig& ul, const DownlinkConfig& dl,
                  const PolicyLayout& layout, const TrainConfig& tcfg,
                  const std::function<void(int, const Checkpoint&)>& on_checkpoint) {
    if (tcfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (tcfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (tcfg.learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be positive");
    if (train_drops.empty()) throw std::invalid_argument("train: no training drops");
    if (layout.L != scenario.L) throw std::invalid_argument("train: layout L does not match scenario");

    // normalization record from the training set only
    FeatureNorm norm;
    {
        Rng norm_rng(tcfg.seed, stream::kFeatureNorm);
        std::vector<Matrix> betas;
        betas.reserve(train_drops.size());
        for (const UEDrop& drop : train_drops) {
            const Matrix cov = shadow_covariance(drop, chan.shadow);
            const Matrix sf = sample_shadow(cov, scenario.L, norm_rng);
            betas.push_back(large_scale(scenario, drop, sf, chan.fc_ghz).beta);
        }
        norm = fit_feature_norm(betas, scenario.area_side);
    }

    Rng init_rng(tcfg.seed, stream::kPolicyInit);
    PolicyParams params = init_policy_params(layout, init_rng);
    OptimizerState opt(params.flat.size());
    Rng rng(tcfg.seed, stream::kTraining);

    TrainResult result;
    result.history.reserve(tcfg.epochs);
    std::vector<size_t> visit(train_drops.size());
    std::iota(visit.begin(), visit.end(), 0);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        for (size_t i = visit.size(); i > 1; --i)
            std::swap(visit[i - 1], visit[rng.below(i)]);

        EpochStats stats;
        for (size_t idx : visit) {
            const UEDrop& drop = train_drops[idx];
            const Matrix cov = shadow_covariance(drop, chan.shadow);
            std::vector<LargeScaleRealization> batch;
            batch.reserve(tcfg.batch_size);
            for (int b = 0; b < tcfg.batch_size; ++b) {
                const Matrix sf = sample_shadow(cov, scenario.L, rng);
                batch.push_back(large_scale(scenario, drop, sf, chan.fc_ghz));
            }
            const BatchStats bs = reinforce_step(params, opt, scenario, drop, batch, ul, dl, norm,
                                                 tcfg.learning_rate,
                                                 tcfg.baseline_variance_reduction, rng);
            stats.mean_reward += bs.mean_reward;
            stats.mean_se_sum += bs.mean_se_sum;
            stats.mean_connections += bs.mean_connections;
        }
        const double steps = static_cast<double>(visit.size());
        stats.mean_reward /= steps;
        stats.mean_se_sum /= steps;
        stats.mean_connections /= steps;
        result.history.push_back(stats);

        if (on_checkpoint && tcfg.checkpoint_every > 0 && (epoch + 1) % tcfg.checkpoint_every == 0 &&
            epoch + 1 < tcfg.epochs) {
            Checkpoint ck{params, norm, "epoch " + std::to_string(epoch + 1)};
            on_checkpoint(epoch + 1, ck);
        }
    }

    result.checkpoint = Checkpoint{std::move(params), std::move(norm),
                                   "seed " + std::to_string(tcfg.seed) + ", epochs " +
                                       std::to_string(tcfg.epochs)};
    return result;
}

double gradient_check_max_rel_err(const PolicyParams& params, const UEOrdering& ordering,
                                  const std::vector<std::vector<double>>& features,
                                  const ClusterAssignment& clusters,
                                  const std::vector<int>& masters, double step) {
    const std::vector<double> analytic = grad_log_prob(params, ordering, features, clusters, masters);
    PolicyParams probe = params;
    double worst = 0.0;
    for (size_t j = 0; j < probe.flat.size(); ++j) {
        const double saved = probe.flat[j];
        probe.flat[j] = saved + step;
        const double up = cluster_log_prob(forward(probe, ordering, features), clusters, masters);
        probe.flat[j] = saved - step;
        const double down = cluster_log_prob(forward(probe, ordering, features), clusters, masters);
        probe.flat[j] = saved;
        const double fd = (up - down) / (2.0 * step);
        const double a = analytic[j];
        const double scale = std::max(std::abs(a), std::abs(fd));
        double rel;
        if (scale >= 1e-6)
            rel = std::abs(a - fd) / scale;
        else
            rel = std::abs(a - fd) <= 1e-10 ? 0.0 : 1.0;
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace cfm
