#include "cfm/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace cfm {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Head outputs are kept strictly inside (0,1): the double-precision sigmoid
// reaches exactly 0 or 1 for |x| beyond ~37, which would break the Bernoulli
// log-likelihood once a confident policy emerges.
constexpr double kProbFloor = 1e-12;

inline double head_sigmoid(double x) {
    return std::clamp(sigmoid(x), kProbFloor, 1.0 - kProbFloor);
}

} // namespace

PolicyParams init_policy_params(const PolicyLayout& layout, Rng& rng) {
    if (layout.q < 1 || layout.L < 1) throw std::invalid_argument("init_policy_params: bad layout");
    PolicyParams p(layout);
    const int q = layout.q;
    const int d = layout.input_dim();
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(d));
    const double u_bound = 1.0 / std::sqrt(static_cast<double>(q));
    for (int g = 0; g < 4; ++g) {
        double* w = p.w(g);
        for (size_t i = 0; i < static_cast<size_t>(q) * d; ++i) w[i] = rng.uniform(-w_bound, w_bound);
        double* u = p.u(g);
        for (size_t i = 0; i < static_cast<size_t>(q) * q; ++i) u[i] = rng.uniform(-u_bound, u_bound);
        double* b = p.b(g);
        const double bias = (g == kForget) ? 1.0 : 0.0;
        for (int i = 0; i < q; ++i) b[i] = bias;
    }
    for (int m = 0; m < layout.n_fc(); ++m) {
        const int in = layout.fc_in(m);
        const int out = layout.fc_out(m);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        double* w = p.fc_w(m);
        for (size_t i = 0; i < static_cast<size_t>(out) * in; ++i) w[i] = rng.uniform(-bound, bound);
        double* b = p.fc_b(m);
        for (int i = 0; i < out; ++i) b[i] = 0.0;
    }
    return p;
}

FeatureNorm fit_feature_norm(const std::vector<Matrix>& beta_samples, double area_side) {
    if (beta_samples.empty()) throw std::invalid_argument("fit_feature_norm: no samples");
    if (area_side <= 0.0) throw std::invalid_argument("fit_feature_norm: area_side must be positive");
    const int L = beta_samples.front().rows;
    FeatureNorm norm;
    norm.area_side = area_side;
    norm.mean_db.assign(L, 0.0);
    norm.std_db.assign(L, 0.0);
    size_t count = 0;
    for (const auto& beta : beta_samples) {
        if (beta.rows != L) throw std::invalid_argument("fit_feature_norm: inconsistent L");
        for (int l = 0; l < L; ++l)
            for (int k = 0; k < beta.cols; ++k) norm.mean_db[l] += 10.0 * std::log10(beta(l, k));
        count += beta.cols;
    }
    for (int l = 0; l < L; ++l) norm.mean_db[l] /= static_cast<double>(count);
    for (const auto& beta : beta_samples) {
        for (int l = 0; l < L; ++l)
            for (int k = 0; k < beta.cols; ++k) {
                const double d = 10.0 * std::log10(beta(l, k)) - norm.mean_db[l];
                norm.std_db[l] += d * d;
            }
    }
    for (int l = 0; l < L; ++l)
        norm.std_db[l] = std::max(std::sqrt(norm.std_db[l] / static_cast<double>(count)), 1e-9);
    return norm;
}

std::vector<std::vector<double>> build_features(const Matrix& beta, const UEDrop& drop,
                                                const FeatureNorm& norm) {
    const int L = beta.rows;
    const int K = beta.cols;
    if (static_cast<int>(norm.mean_db.size()) != L)
        throw std::invalid_argument("build_features: normalization record L mismatch");
    if (drop.K != K) throw std::invalid_argument("build_features: drop/beta K mismatch");
    std::vector<std::vector<double>> features(K);
    for (int k = 0; k < K; ++k) {
        auto& xi = features[k];
        xi.resize(L + 2);
        for (int l = 0; l < L; ++l)
            xi[l] = (10.0 * std::log10(beta(l, k)) - norm.mean_db[l]) / norm.std_db[l];
        xi[L] = drop.ue_positions[k][0] / norm.area_side;
        xi[L + 1] = drop.ue_positions[k][1] / norm.area_side;
    }
    return features;
}

UEOrdering order_ues(const Matrix& beta, const std::vector<int>& masters,
                     const std::vector<int>& ap_order) {
    const int K = beta.cols;
    if (static_cast<int>(masters.size()) != K)
        throw std::invalid_argument("order_ues: masters size mismatch");
    UEOrdering ordering;
    ordering.subchains.resize(ap_order.size());
    for (size_t pos = 0; pos < ap_order.size(); ++pos) {
        const int l = ap_order[pos];
        auto& chain = ordering.subchains[pos];
        for (int k = 0; k < K; ++k)
            if (masters[k] == l) chain.push_back(k);
        std::sort(chain.begin(), chain.end(), [&](int a, int b) {
            if (beta(l, a) != beta(l, b)) return beta(l, a) > beta(l, b);
            return a < b;
        });
        ordering.flat.insert(ordering.flat.end(), chain.begin(), chain.end());
    }
    if (static_cast<int>(ordering.flat.size()) != K)
        throw std::runtime_error("order_ues: some UE's master is outside ap_order");
    return ordering;
}

namespace {

// Shared cell evaluation; writes gate activations and the new state into the
// provided buffers (each sized q).
void eval_cell(const PolicyParams& p, const double* xi, const double* v_prev, const double* z_prev,
               double* f, double* i, double* o, double* c, double* zeta, double* tanh_zeta,
               double* v) {
    const int q = p.layout.q;
    const int d = p.layout.input_dim();
    double* pre[4] = {f, i, o, c};
    for (int g = 0; g < 4; ++g) {
        std::memcpy(pre[g], p.b(g), sizeof(double) * q);
        matvec_accum(p.w(g), q, d, xi, pre[g]);
        matvec_accum(p.u(g), q, q, v_prev, pre[g]);
    }
    for (int j = 0; j < q; ++j) {
        f[j] = sigmoid(f[j]);
        i[j] = sigmoid(i[j]);
        o[j] = sigmoid(o[j]);
        c[j] = std::tanh(c[j]);
        zeta[j] = f[j] * z_prev[j] + i[j] * c[j];
        tanh_zeta[j] = std::tanh(zeta[j]);
        v[j] = o[j] * tanh_zeta[j];
    }
}

} // namespace

std::pair<std::vector<double>, std::vector<double>>
lstm_step(const PolicyParams& params, const std::vector<double>& xi,
          const std::vector<double>& upsilon_prev, const std::vector<double>& zeta_prev) {
    const int q = params.layout.q;
    if (static_cast<int>(xi.size()) != params.layout.input_dim() ||
        static_cast<int>(upsilon_prev.size()) != q || static_cast<int>(zeta_prev.size()) != q)
        throw std::invalid_argument("lstm_step: dimension mismatch");
    std::vector<double> f(q), i(q), o(q), c(q), zeta(q), tz(q), v(q);
    eval_cell(params, xi.data(), upsilon_prev.data(), zeta_prev.data(), f.data(), i.data(),
              o.data(), c.data(), zeta.data(), tz.data(), v.data());
    return {std::move(v), std::move(zeta)};
}

Matrix forward(const PolicyParams& params, const UEOrdering& ordering,
               const std::vector<std::vector<double>>& features, ForwardTrace* trace) {
    const PolicyLayout& lay = params.layout;
    const int q = lay.q;
    const int K = static_cast<int>(ordering.flat.size());
    if (K == 0) throw std::invalid_argument("forward: empty ordering");
    size_t fc_act_len = 0;
    for (int m = 0; m < lay.n_fc(); ++m) fc_act_len += lay.fc_in(m);

    Matrix probs(K, lay.L);
    std::vector<double> v(q, 0.0), z(q, 0.0);
    std::vector<double> f(q), i(q), o(q), c(q), zeta(q), tz(q), v_next(q);
    if (trace) {
        trace->cells.clear();
        trace->cells.reserve(K);
    }
    for (int pos = 0; pos < K; ++pos) {
        const int ue = ordering.flat[pos];
        const auto& xi = features.at(ue);
        if (static_cast<int>(xi.size()) != lay.input_dim())
            throw std::invalid_argument("forward: feature dimension mismatch");
        eval_cell(params, xi.data(), v.data(), z.data(), f.data(), i.data(), o.data(), c.data(),
                  zeta.data(), tz.data(), v_next.data());

        // shared FC head, rectified-linear hidden layers, sigmoid output
        std::vector<double> act(fc_act_len);
        std::memcpy(act.data(), v_next.data(), sizeof(double) * q);
        size_t in_off = 0;
        std::vector<double> out_row(lay.L);
        for (int m = 0; m < lay.n_fc(); ++m) {
            const int in = lay.fc_in(m);
            const int out = lay.fc_out(m);
            double* dst = (m == lay.n_fc() - 1) ? out_row.data() : act.data() + in_off + in;
            std::memcpy(dst, params.fc_b(m), sizeof(double) * out);
            matvec_accum(params.fc_w(m), out, in, act.data() + in_off, dst);
            if (m == lay.n_fc() - 1)
                for (int r = 0; r < out; ++r) dst[r] = head_sigmoid(dst[r]);
            else
                for (int r = 0; r < out; ++r) dst[r] = std::max(dst[r], 0.0);
            in_off += in;
        }
        for (int l = 0; l < lay.L; ++l) probs(ue, l) = out_row[l];

        if (trace) {
            CellTrace ct;
            ct.ue = ue;
            ct.v_prev = v;
            ct.z_prev = z;
            ct.f = f;
            ct.i = i;
            ct.o = o;
            ct.c = c;
            ct.zeta = zeta;
            ct.tanh_zeta = tz;
            ct.fc_act = act;
            ct.probs = out_row;
            trace->cells.push_back(std::move(ct));
        }
        v = v_next;
        z = zeta;
    }
    return probs;
}

std::pair<ClusterAssignment, double> sample_clusters(const Matrix& probs,
                                                     const std::vector<int>& masters, Rng& rng) {
    const int K = probs.rows;
    const int L = probs.cols;
    ClusterAssignment clusters(L, K);
    double logp = 0.0;
    for (int k = 0; k < K; ++k) {
        for (int l = 0; l < L; ++l) {
            if (l == masters[k]) {
                clusters.set(l, k, true);
                continue;
            }
            const double p = probs(k, l);
            if (!(p > 0.0 && p < 1.0))
                throw std::runtime_error("sample_clusters: probability outside (0,1)");
            const bool on = rng.bernoulli(p);
            clusters.set(l, k, on);
            logp += on ? std::log(p) : std::log1p(-p);
        }
    }
    return {std::move(clusters), logp};
}

ClusterAssignment threshold_clusters(const Matrix& probs, const std::vector<int>& masters) {
    const int K = probs.rows;
    const int L = probs.cols;
    ClusterAssignment clusters(L, K);
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
            clusters.set(l, k, l == masters[k] || probs(k, l) > 0.5);
    return clusters;
}

double cluster_log_prob(const Matrix& probs, const ClusterAssignment& clusters,
                        const std::vector<int>& masters) {
    double logp = 0.0;
    for (int k = 0; k < probs.rows; ++k) {
        for (int l = 0; l < probs.cols; ++l) {
            if (l == masters[k]) continue;
            const double p = probs(k, l);
            if (!(p > 0.0 && p < 1.0))
                throw std::runtime_error("cluster_log_prob: probability outside (0,1)");
            logp += clusters.is_active(l, k) ? std::log(p) : std::log1p(-p);
        }
    }
    return logp;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O (native-endian binary, versioned)
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'F', 'M', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
    put<uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::istream& is) {
    const uint64_t n = get<uint64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    put<uint32_t>(os, 1u); // version
    put<int32_t>(os, ckpt.params.layout.q);
    put<int32_t>(os, ckpt.params.layout.L);
    put<uint32_t>(os, static_cast<uint32_t>(ckpt.params.layout.fc_hidden.size()));
    for (int h : ckpt.params.layout.fc_hidden) put<int32_t>(os, h);
    put_doubles(os, ckpt.params.flat);
    put_doubles(os, ckpt.norm.mean_db);
    put_doubles(os, ckpt.norm.std_db);
    put<double>(os, ckpt.norm.area_side);
    put<uint32_t>(os, static_cast<uint32_t>(ckpt.lineage.size()));
    os.write(ckpt.lineage.data(), static_cast<std::streamsize>(ckpt.lineage.size()));
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const uint32_t version = get<uint32_t>(is);
    if (version != 1u) throw std::runtime_error("load_checkpoint: unsupported version");
    Checkpoint ckpt;
    PolicyLayout lay;
    lay.q = get<int32_t>(is);
    lay.L = get<int32_t>(is);
    const uint32_t nh = get<uint32_t>(is);
    lay.fc_hidden.resize(nh);
    for (uint32_t i = 0; i < nh; ++i) lay.fc_hidden[i] = get<int32_t>(is);
    ckpt.params = PolicyParams(lay);
    ckpt.params.flat = get_doubles(is);
    if (ckpt.params.flat.size() != lay.total())
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    ckpt.norm.mean_db = get_doubles(is);
    ckpt.norm.std_db = get_doubles(is);
    ckpt.norm.area_side = get<double>(is);
    const uint32_t len = get<uint32_t>(is);
    ckpt.lineage.resize(len);
    is.read(ckpt.lineage.data(), len);
    if (!is) throw std::runtime_error("load_checkpoint: truncated file");
    return ckpt;
}

} // namespace cfm
