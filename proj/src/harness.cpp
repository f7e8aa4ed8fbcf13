#include "cfm/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cfm {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

using KvSections = std::map<std::string, std::map<std::string, std::string>>;

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

KvSections parse_ini(std::istream& is, const std::string& origin) {
    KvSections doc;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
        doc[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return doc;
}

class ConfigReader {
public:
    ConfigReader(KvSections doc, std::string origin) : doc_(std::move(doc)), origin_(std::move(origin)) {}

    double num(const std::string& sec, const std::string& key, double fallback) {
        const std::string* v = find(sec, key);
        if (!v) return fallback;
        try {
            return std::stod(*v);
        } catch (...) {
            throw std::runtime_error(origin_ + ": bad number for " + sec + "." + key + ": " + *v);
        }
    }
    long long integer(const std::string& sec, const std::string& key, long long fallback) {
        const std::string* v = find(sec, key);
        if (!v) return fallback;
        try {
            return std::stoll(*v);
        } catch (...) {
            throw std::runtime_error(origin_ + ": bad integer for " + sec + "." + key + ": " + *v);
        }
    }
    uint64_t unsigned_int(const std::string& sec, const std::string& key, uint64_t fallback) {
        const std::string* v = find(sec, key);
        if (!v) return fallback;
        try {
            return std::stoull(*v);
        } catch (...) {
            throw std::runtime_error(origin_ + ": bad seed for " + sec + "." + key + ": " + *v);
        }
    }
    bool flag(const std::string& sec, const std::string& key, bool fallback) {
        const std::string* v = find(sec, key);
        if (!v) return fallback;
        if (*v == "1" || *v == "true" || *v == "on") return true;
        if (*v == "0" || *v == "false" || *v == "off") return false;
        throw std::runtime_error(origin_ + ": bad flag for " + sec + "." + key + ": " + *v);
    }
    std::vector<int> int_list(const std::string& sec, const std::string& key, std::vector<int> fallback) {
        const std::string* v = find(sec, key);
        if (!v) return fallback;
        std::vector<int> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            out.push_back(std::stoi(item));
        }
        return out;
    }

private:
    const std::string* find(const std::string& sec, const std::string& key) const {
        const auto s = doc_.find(sec);
        if (s == doc_.end()) return nullptr;
        const auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        return &k->second;
    }

    KvSections doc_;
    std::string origin_;
};

} // namespace

double ExperimentConfig::noise_mw() const { return std::pow(10.0, noise_dbm / 10.0); }

UplinkConfig ExperimentConfig::uplink() const {
    return UplinkConfig{eta_mw, noise_mw(), tau_p, tau_c};
}

DownlinkConfig ExperimentConfig::downlink() const {
    DownlinkConfig dl;
    dl.rho_max_mw = rho_max_mw;
    dl.sigma_dl2_mw = noise_mw();
    dl.N = antennas;
    dl.tau_c = tau_c;
    dl.tau_p = tau_p;
    dl.tau_u = tau_u;
    dl.lambda = lambda;
    return dl;
}

ChannelConfig ExperimentConfig::channel() const {
    return ChannelConfig{fc_ghz, ShadowModel{sigma_sf_db, delta_sf_m}};
}

PolicyLayout ExperimentConfig::policy_layout() const {
    PolicyLayout lay;
    lay.q = hidden;
    lay.L = ap_count();
    lay.fc_hidden = fc_hidden;
    return lay;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch;
    t.learning_rate = learning_rate;
    t.lambda = lambda;
    t.seed = master_seed;
    t.baseline_variance_reduction = variance_reduction;
    t.checkpoint_every = checkpoint_every;
    return t;
}

void ExperimentConfig::validate() const {
    if (tau_p < 1 || tau_p > tau_c) throw std::runtime_error("config: need 1 <= tau_p <= tau_c");
    if (tau_c - tau_p - tau_u <= 0) throw std::runtime_error("config: data phase tau_d must be positive");
    if (eta_mw <= 0.0 || rho_max_mw <= 0.0) throw std::runtime_error("config: powers must be positive");
    if (grid_side < 1) throw std::runtime_error("config: grid_side must be >= 1");
    if (area_m <= 0.0) throw std::runtime_error("config: area must be positive");
    if (jitter < 0.0 || jitter > 1.0) throw std::runtime_error("config: jitter must lie in [0,1]");
    if (antennas < 1) throw std::runtime_error("config: antennas must be >= 1");
    if (ues < 1) throw std::runtime_error("config: ues must be >= 1");
    if (train_locations < 1 || test_locations < 1)
        throw std::runtime_error("config: dataset sizes must be >= 1");
    if (hidden < 1) throw std::runtime_error("config: hidden size must be >= 1");
    if (epochs < 1 || batch < 1) throw std::runtime_error("config: epochs and batch must be >= 1");
    if (learning_rate <= 0.0) throw std::runtime_error("config: learning_rate must be positive");
    if (lambda < 0.0) throw std::runtime_error("config: lambda must be >= 0");
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "[radio]\n";
    os << "bandwidth_mhz = " << bandwidth_mhz << "\n";
    os << "carrier_ghz = " << fc_ghz << "\n";
    os << "tau_c = " << tau_c << "\n";
    os << "tau_p = " << tau_p << "\n";
    os << "tau_u = " << tau_u << "\n";
    os << "noise_dbm = " << noise_dbm << "\n";
    os << "eta_mw = " << eta_mw << "\n";
    os << "rho_max_mw = " << rho_max_mw << "\n";
    os << "height_m = " << height_m << "\n";
    os << "[shadow]\n";
    os << "sigma_db = " << sigma_sf_db << "\n";
    os << "correlation_length_m = " << delta_sf_m << "\n";
    os << "[scenario]\n";
    os << "grid_side = " << grid_side << "\n";
    os << "area_m = " << area_m << "\n";
    os << "jitter = " << jitter << "\n";
    os << "antennas = " << antennas << "\n";
    os << "[dataset]\n";
    os << "train_locations = " << train_locations << "\n";
    os << "test_locations = " << test_locations << "\n";
    os << "ues = " << ues << "\n";
    os << "[policy]\n";
    os << "hidden = " << hidden << "\n";
    os << "fc = ";
    for (size_t i = 0; i < fc_hidden.size(); ++i) os << (i ? "," : "") << fc_hidden[i];
    os << "\n";
    os << "[training]\n";
    os << "epochs = " << epochs << "\n";
    os << "batch = " << batch << "\n";
    os << "learning_rate = " << learning_rate << "\n";
    os << "lambda = " << lambda << "\n";
    os << "variance_reduction = " << (variance_reduction ? 1 : 0) << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "[seed]\n";
    os << "master = " << master_seed << "\n";
    return os.str();
}

std::string ExperimentConfig::hash_hex() const {
    // FNV-1a over the canonical text
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : canonical_text()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

ExperimentConfig parse_config(std::istream& is, const std::string& origin) {
    ConfigReader r(parse_ini(is, origin), origin);
    ExperimentConfig c;
    c.bandwidth_mhz = r.num("radio", "bandwidth_mhz", c.bandwidth_mhz);
    c.fc_ghz = r.num("radio", "carrier_ghz", c.fc_ghz);
    c.tau_c = static_cast<int>(r.integer("radio", "tau_c", c.tau_c));
    c.tau_p = static_cast<int>(r.integer("radio", "tau_p", c.tau_p));
    c.tau_u = static_cast<int>(r.integer("radio", "tau_u", c.tau_u));
    c.noise_dbm = r.num("radio", "noise_dbm", c.noise_dbm);
    c.eta_mw = r.num("radio", "eta_mw", c.eta_mw);
    c.rho_max_mw = r.num("radio", "rho_max_mw", c.rho_max_mw);
    c.height_m = r.num("radio", "height_m", c.height_m);
    c.sigma_sf_db = r.num("shadow", "sigma_db", c.sigma_sf_db);
    c.delta_sf_m = r.num("shadow", "correlation_length_m", c.delta_sf_m);
    c.grid_side = static_cast<int>(r.integer("scenario", "grid_side", c.grid_side));
    c.area_m = r.num("scenario", "area_m", c.area_m);
    c.jitter = r.num("scenario", "jitter", c.jitter);
    c.antennas = static_cast<int>(r.integer("scenario", "antennas", c.antennas));
    c.train_locations = static_cast<int>(r.integer("dataset", "train_locations", c.train_locations));
    c.test_locations = static_cast<int>(r.integer("dataset", "test_locations", c.test_locations));
    c.ues = static_cast<int>(r.integer("dataset", "ues", c.ues));
    c.hidden = static_cast<int>(r.integer("policy", "hidden", c.hidden));
    c.fc_hidden = r.int_list("policy", "fc", c.fc_hidden);
    c.epochs = static_cast<int>(r.integer("training", "epochs", c.epochs));
    c.batch = static_cast<int>(r.integer("training", "batch", c.batch));
    c.learning_rate = r.num("training", "learning_rate", c.learning_rate);
    c.lambda = r.num("training", "lambda", c.lambda);
    c.variance_reduction = r.flag("training", "variance_reduction", c.variance_reduction);
    c.checkpoint_every = static_cast<int>(r.integer("training", "checkpoint_every", c.checkpoint_every));
    c.master_seed = r.unsigned_int("seed", "master", c.master_seed);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(is, path);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

Dataset generate_dataset(const ExperimentConfig& cfg) {
    Dataset ds;
    Rng scenario_rng(cfg.master_seed, stream::kScenario);
    ds.scenario = place_aps(cfg.grid_side, cfg.area_m, cfg.jitter, scenario_rng, cfg.height_m,
                            cfg.antennas);

    Rng train_rng(cfg.master_seed, stream::kTrainDrops);
    ds.train_drops.reserve(cfg.train_locations);
    for (int i = 0; i < cfg.train_locations; ++i)
        ds.train_drops.push_back(sample_ue_drop(cfg.ues, cfg.area_m, train_rng));

    Rng test_rng(cfg.master_seed, stream::kTestDrops);
    Rng shadow_rng(cfg.master_seed, stream::kTestShadow);
    const ChannelConfig chan = cfg.channel();
    ds.test.reserve(cfg.test_locations);
    for (int i = 0; i < cfg.test_locations; ++i) {
        TestLocation loc;
        loc.drop = sample_ue_drop(cfg.ues, cfg.area_m, test_rng);
        const Matrix cov = shadow_covariance(loc.drop, chan.shadow);
        const Matrix sf = sample_shadow(cov, ds.scenario.L, shadow_rng);
        loc.realization = large_scale(ds.scenario, loc.drop, sf, chan.fc_ghz);
        ds.test.push_back(std::move(loc));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalReport evaluate_with(const Dataset& ds, const ExperimentConfig& cfg, const std::string& tag,
                         const Clusterer& make_clusters) {
    const UplinkConfig ul = cfg.uplink();
    const DownlinkConfig dl = cfg.downlink();
    EvalReport report;
    report.method = tag;
    report.records.reserve(ds.test.size());
    for (size_t i = 0; i < ds.test.size(); ++i) {
        const TestLocation& loc = ds.test[i];
        const Matrix& beta = loc.realization.beta;
        const PilotPlan plan = assign_pilots(beta, compute_masters(beta), ul.tau_p);
        const Matrix gamma = compute_gamma(beta, plan, ul);
        const ClusterAssignment clusters = make_clusters(beta, plan, loc.drop);
        LocationRecord rec;
        rec.location = static_cast<int>(i);
        rec.per_ue_se = per_ue_se(clusters, beta, gamma, plan, dl);
        rec.se_sum = std::accumulate(rec.per_ue_se.begin(), rec.per_ue_se.end(), 0.0);
        rec.connections = clusters.connection_count();
        rec.objective = rec.se_sum - dl.lambda * rec.connections;
        report.mean_se_sum += rec.se_sum;
        report.mean_objective += rec.objective;
        report.mean_connections += rec.connections;
        report.records.push_back(std::move(rec));
    }
    const double n = static_cast<double>(report.records.size());
    report.mean_se_sum /= n;
    report.mean_objective /= n;
    report.mean_connections /= n;
    report.se_sum_cdf.reserve(report.records.size());
    report.connections_cdf.reserve(report.records.size());
    for (const auto& rec : report.records) {
        report.se_sum_cdf.push_back(rec.se_sum);
        report.connections_cdf.push_back(rec.connections);
    }
    std::sort(report.se_sum_cdf.begin(), report.se_sum_cdf.end());
    std::sort(report.connections_cdf.begin(), report.connections_cdf.end());
    return report;
}

EvalReport evaluate_baseline(const Dataset& ds, const ExperimentConfig& cfg) {
    return evaluate_with(ds, cfg, "baseline",
                         [](const Matrix& beta, const PilotPlan& plan, const UEDrop&) {
                             return baseline_clusters(beta, plan);
                         });
}

EvalReport evaluate_master_only(const Dataset& ds, const ExperimentConfig& cfg) {
    return evaluate_with(ds, cfg, "master_only",
                         [&](const Matrix& beta, const PilotPlan& plan, const UEDrop&) {
                             (void)beta;
                             return master_only_clusters(plan.masters, ds.scenario.L);
                         });
}

EvalReport evaluate_policy(const Dataset& ds, const ExperimentConfig& cfg, const Checkpoint& ckpt) {
    if (ckpt.params.layout.L != ds.scenario.L)
        throw std::runtime_error("checkpoint trained for " + std::to_string(ckpt.params.layout.L) +
                                 " APs, scenario has " + std::to_string(ds.scenario.L));
    return evaluate_with(ds, cfg, "policy",
                         [&](const Matrix& beta, const PilotPlan& plan, const UEDrop& drop) {
                             const auto features = build_features(beta, drop, ckpt.norm);
                             const UEOrdering ordering =
                                 order_ues(beta, plan.masters, ds.scenario.ap_order);
                             const Matrix probs = forward(ckpt.params, ordering, features);
                             return threshold_clusters(probs, plan.masters);
                         });
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

namespace {

void provenance(std::ostream& os, const ExperimentConfig& cfg, const std::string& kind) {
    os << "# cfm " << kind << " v1\n";
    os << "# config_hash " << cfg.hash_hex() << "\n";
    os << "# seed " << cfg.master_seed << "\n";
}

} // namespace

void export_connection_map(std::ostream& os, const ExperimentConfig& cfg, const Dataset& ds,
                           int location, const std::string& tag, const ClusterAssignment& clusters) {
    if (location < 0 || location >= static_cast<int>(ds.test.size()))
        throw std::out_of_range("export_connection_map: location index out of range");
    provenance(os, cfg, "map");
    os << "# method " << tag << "\n";
    os << "# location " << location << "\n";
    os << std::setprecision(17);
    for (const auto& p : ds.scenario.ap_positions) os << "AP " << p[0] << " " << p[1] << "\n";
    for (const auto& p : ds.test[location].drop.ue_positions) os << "UE " << p[0] << " " << p[1] << "\n";
    // the access plan the location was scored under: UE -> master AP, pilot
    const Matrix& beta = ds.test[location].realization.beta;
    const PilotPlan plan = assign_pilots(beta, compute_masters(beta), cfg.tau_p);
    for (int k = 0; k < clusters.K; ++k)
        os << "PLAN " << k << " " << plan.masters[k] << " " << plan.pilots[k] << "\n";
    for (int l = 0; l < clusters.L; ++l)
        for (int k = 0; k < clusters.K; ++k)
            if (clusters.is_active(l, k)) os << "LINK " << l << " " << k << "\n";
}

void write_report_csv(std::ostream& os, const ExperimentConfig& cfg, const EvalReport& report) {
    provenance(os, cfg, "report");
    os << "# method " << report.method << "\n";
    os << std::setprecision(17);
    os << "location,method,se_sum,objective,connections";
    const int K = report.records.empty() ? 0 : static_cast<int>(report.records.front().per_ue_se.size());
    for (int k = 0; k < K; ++k) os << ",se_ue" << k;
    os << "\n";
    for (const auto& rec : report.records) {
        os << rec.location << "," << report.method << "," << rec.se_sum << "," << rec.objective << ","
           << rec.connections;
        for (double se : rec.per_ue_se) os << "," << se;
        os << "\n";
    }
    os << "# mean_se_sum " << report.mean_se_sum << "\n";
    os << "# mean_objective " << report.mean_objective << "\n";
    os << "# mean_connections " << report.mean_connections << "\n";
}

void write_cdf_csv(std::ostream& os, const ExperimentConfig& cfg, const EvalReport& report) {
    provenance(os, cfg, "cdf");
    os << "# method " << report.method << "\n";
    os << std::setprecision(17);
    os << "se_sum,se_sum_cdf,connections,connections_cdf\n";
    const size_t n = report.se_sum_cdf.size();
    for (size_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(i + 1) / static_cast<double>(n);
        os << report.se_sum_cdf[i] << "," << p << "," << report.connections_cdf[i] << "," << p << "\n";
    }
}

void write_history_csv(std::ostream& os, const ExperimentConfig& cfg,
                       const std::vector<EpochStats>& history) {
    provenance(os, cfg, "history");
    os << std::setprecision(17);
    os << "epoch,mean_reward,mean_se_sum,mean_connections\n";
    for (size_t e = 0; e < history.size(); ++e)
        os << e + 1 << "," << history[e].mean_reward << "," << history[e].mean_se_sum << ","
           << history[e].mean_connections << "\n";
}

// ---------------------------------------------------------------------------
// Command bodies
// ---------------------------------------------------------------------------

namespace {

ExperimentConfig load_with_override(const std::string& path, std::optional<uint64_t> seed_override) {
    ExperimentConfig cfg = load_config(path);
    if (seed_override) {
        cfg.master_seed = *seed_override;
        cfg.validate();
    }
    return cfg;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary); // binary: keep byte-identical newlines
    if (!os) throw std::runtime_error("cannot open output file: " + p.string());
    return os;
}

void write_map_if_requested(const ExperimentConfig& cfg, const Dataset& ds, int map_location,
                            const std::string& tag, const Clusterer& clusterer,
                            const std::filesystem::path& dir) {
    if (map_location < 0) return;
    const TestLocation& loc = ds.test.at(map_location);
    const PilotPlan plan =
        assign_pilots(loc.realization.beta, compute_masters(loc.realization.beta), cfg.tau_p);
    const ClusterAssignment clusters = clusterer(loc.realization.beta, plan, loc.drop);
    auto os = open_out(dir / ("map_" + tag + "_" + std::to_string(map_location) + ".txt"));
    export_connection_map(os, cfg, ds, map_location, tag, clusters);
}

} // namespace

int run_baseline(const std::string& config_path, std::optional<uint64_t> seed_override,
                 const std::string& out_dir, int map_location) {
    try {
        const ExperimentConfig cfg = load_with_override(config_path, seed_override);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        const Dataset ds = generate_dataset(cfg);
        const EvalReport report = evaluate_baseline(ds, cfg);
        {
            auto os = open_out(dir / "report_baseline.csv");
            write_report_csv(os, cfg, report);
        }
        {
            auto os = open_out(dir / "cdf_baseline.csv");
            write_cdf_csv(os, cfg, report);
        }
        write_map_if_requested(cfg, ds, map_location, "baseline",
                               [](const Matrix& beta, const PilotPlan& plan, const UEDrop&) {
                                   return baseline_clusters(beta, plan);
                               },
                               dir);
        std::printf("baseline: mean SE sum %.4f bit/s/Hz, mean connections %.2f over %zu locations\n",
                    report.mean_se_sum, report.mean_connections, report.records.size());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

int run_train(const std::string& config_path, std::optional<uint64_t> seed_override,
              const std::string& out_dir) {
    try {
        const ExperimentConfig cfg = load_with_override(config_path, seed_override);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        const Dataset ds = generate_dataset(cfg);
        const auto on_checkpoint = [&](int epoch, const Checkpoint& ck) {
            save_checkpoint((dir / ("checkpoint_e" + std::to_string(epoch) + ".bin")).string(), ck);
        };
        const TrainResult result = train(ds.scenario, ds.train_drops, cfg.channel(), cfg.uplink(),
                                         cfg.downlink(), cfg.policy_layout(), cfg.train_config(),
                                         on_checkpoint);
        save_checkpoint((dir / "checkpoint.bin").string(), result.checkpoint);
        {
            auto os = open_out(dir / "history.csv");
            write_history_csv(os, cfg, result.history);
        }
        std::printf("train: %d epochs done; final mean reward %.4f, mean connections %.2f\n",
                    cfg.epochs, result.history.back().mean_reward,
                    result.history.back().mean_connections);
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

int run_eval(const std::string& config_path, std::optional<uint64_t> seed_override,
             const std::string& out_dir, const std::string& checkpoint_path, int map_location) {
    try {
        const ExperimentConfig cfg = load_with_override(config_path, seed_override);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        const Checkpoint ckpt = load_checkpoint(checkpoint_path);
        const Dataset ds = generate_dataset(cfg);
        const EvalReport report = evaluate_policy(ds, cfg, ckpt);
        {
            auto os = open_out(dir / "report_policy.csv");
            write_report_csv(os, cfg, report);
        }
        {
            auto os = open_out(dir / "cdf_policy.csv");
            write_cdf_csv(os, cfg, report);
        }
        write_map_if_requested(cfg, ds, map_location, "policy",
                               [&](const Matrix& beta, const PilotPlan& plan, const UEDrop& drop) {
                                   const auto features = build_features(beta, drop, ckpt.norm);
                                   const UEOrdering ordering =
                                       order_ues(beta, plan.masters, ds.scenario.ap_order);
                                   return threshold_clusters(forward(ckpt.params, ordering, features),
                                                             plan.masters);
                               },
                               dir);
        std::printf("policy: mean SE sum %.4f bit/s/Hz, mean connections %.2f over %zu locations\n",
                    report.mean_se_sum, report.mean_connections, report.records.size());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

int run_validate(const std::string& config_path, std::optional<uint64_t> seed_override) {
    try {
        const ExperimentConfig cfg = load_with_override(config_path, seed_override);

        // estimation-chain check: two APs, two UEs forced onto one pilot
        Matrix beta(2, 2);
        beta(0, 0) = 2e-9;
        beta(0, 1) = 5e-10;
        beta(1, 0) = 4e-10;
        beta(1, 1) = 1e-9;
        UplinkConfig ul = cfg.uplink();
        ul.tau_p = std::min(cfg.tau_p, 4);
        PilotPlan plan;
        plan.tau_p = ul.tau_p;
        plan.masters = {0, 1};
        plan.pilots = {0, 0};
        plan.sharing_sets.assign(ul.tau_p, {});
        plan.sharing_sets[0] = {0, 1};
        Rng mc_rng(cfg.master_seed, 100);
        const EstimationReport est = mc_validate_estimation(beta, plan, ul, cfg.antennas, 100000, mc_rng);

        // analytic-vs-numeric gradient on a small chain. The instance is
        // frozen (not seeded from the config): central differences are only a
        // valid oracle away from the rectifier kinks, and this instance has
        // been verified to keep clear of them.
        PolicyLayout lay;
        lay.q = 8;
        lay.L = 3;
        lay.fc_hidden = {256, 128};
        Rng grad_rng(7);
        const PolicyParams params = init_policy_params(lay, grad_rng);
        std::vector<std::vector<double>> features(2);
        for (auto& xi : features) {
            xi.resize(lay.input_dim());
            for (double& x : xi) x = grad_rng.uniform(-1.0, 1.0);
        }
        UEOrdering ordering;
        ordering.subchains = {{0}, {}, {1}};
        ordering.flat = {0, 1};
        const std::vector<int> masters = {0, 2};
        const Matrix probs = forward(params, ordering, features);
        Rng sample_rng(8);
        const auto [clusters, logp] = sample_clusters(probs, masters, sample_rng);
        (void)logp;
        const double grad_err = gradient_check_max_rel_err(params, ordering, features, clusters, masters);

        std::printf("validate: max MC estimation relative error %.5f (threshold 0.02)\n", est.max_rel_err);
        std::printf("validate: max gradient relative error %.3e (threshold 1e-4)\n", grad_err);
        const bool ok = est.max_rel_err < 0.02 && grad_err <= 1e-4;
        if (!ok) std::fprintf(stderr, "error: validation thresholds exceeded\n");
        return ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

int run_dataset(const std::string& config_path, std::optional<uint64_t> seed_override,
                const std::string& out_dir, bool inspect) {
    try {
        const ExperimentConfig cfg = load_with_override(config_path, seed_override);
        const Dataset ds = generate_dataset(cfg);
        if (inspect) {
            std::printf("scenario: %d APs on %.0f m square (jitter %.2f), %d antennas each\n",
                        ds.scenario.L, cfg.area_m, cfg.jitter, cfg.antennas);
            std::printf("dataset: %zu training drops, %zu test locations, %d UEs each\n",
                        ds.train_drops.size(), ds.test.size(), cfg.ues);
            double bmin = 1.0, bmax = 0.0;
            for (const auto& loc : ds.test)
                for (double b : loc.realization.beta.data) {
                    bmin = std::min(bmin, b);
                    bmax = std::max(bmax, b);
                }
            std::printf("test-channel beta range: [%.3e, %.3e]\n", bmin, bmax);
            return 0;
        }
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        {
            auto os = open_out(dir / "scenario.txt");
            provenance(os, cfg, "scenario-file");
            os << "# jitter " << cfg.jitter << "\n";
            write_scenario(os, ds.scenario);
        }
        {
            auto os = open_out(dir / "train_drops.txt");
            provenance(os, cfg, "drops-file");
            write_drops(os, ds.train_drops);
        }
        {
            std::vector<UEDrop> test_drops;
            test_drops.reserve(ds.test.size());
            for (const auto& loc : ds.test) test_drops.push_back(loc.drop);
            auto os = open_out(dir / "test_drops.txt");
            provenance(os, cfg, "drops-file");
            write_drops(os, test_drops);
        }
        {
            auto os = open_out(dir / "test_beta_0.csv");
            write_beta_csv(os, ds.test.front().realization);
        }
        std::printf("dataset: wrote scenario and drops under %s\n", out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

} // namespace cfm
