/**
 * @file harness.hpp
 * @brief Experiment orchestration: configuration file handling, dataset
 * generation with disjoint seeded streams, baseline/policy evaluation with
 * paired channel realizations, plot-ready exports, and the command bodies
 * behind the CLI.
 */
#pragma once

#include "cfm/access.hpp"
#include "cfm/baseline.hpp"
#include "cfm/channel.hpp"
#include "cfm/downlink.hpp"
#include "cfm/policy.hpp"
#include "cfm/scenario.hpp"
#include "cfm/training.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cfm {

/// Every knob of an experiment. Defaults reproduce the reference setup
/// (25 APs on a 700 m square, 10 UEs, 20 MHz at 2 GHz, -94 dBm noise).
struct ExperimentConfig {
    // radio
    double bandwidth_mhz = 20.0; // recorded metadata; SE stays per-Hz
    double fc_ghz = 2.0;
    int tau_c = 200;
    int tau_p = 10;
    int tau_u = 0;
    double noise_dbm = -94.0; // shared by uplink and downlink
    double eta_mw = 100.0;
    double rho_max_mw = 200.0;
    double height_m = 10.0;

    // shadow fading
    double sigma_sf_db = 4.0;
    double delta_sf_m = 9.0;

    // scenario
    int grid_side = 5;
    double area_m = 700.0;
    double jitter = 0.5;
    int antennas = 4;

    // dataset
    int train_locations = 1000;
    int test_locations = 200;
    int ues = 10;

    // policy
    int hidden = 512;
    std::vector<int> fc_hidden = {256, 128};

    // training
    int epochs = 200;
    int batch = 64;
    double learning_rate = 1e-5;
    double lambda = 0.04;
    bool variance_reduction = false;
    int checkpoint_every = 0;

    uint64_t master_seed = 1;

    double noise_mw() const;
    int ap_count() const { return grid_side * grid_side; }

    UplinkConfig uplink() const;
    DownlinkConfig downlink() const;
    ChannelConfig channel() const;
    PolicyLayout policy_layout() const;
    TrainConfig train_config() const;

    /// Fixed-order reserialization of every field; the provenance hash is
    /// computed over this text.
    std::string canonical_text() const;
    std::string hash_hex() const;

    void validate() const; // throws on inconsistent values
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& is, const std::string& origin = "<stream>");

struct TestLocation {
    UEDrop drop;
    LargeScaleRealization realization; // the one channel every method sees
};

struct Dataset {
    Scenario scenario;
    std::vector<UEDrop> train_drops;
    std::vector<TestLocation> test;
};

/// Scenario, training drops, and test drops with one evaluation realization
/// each, all drawn from disjoint streams of the master seed.
Dataset generate_dataset(const ExperimentConfig& cfg);

struct LocationRecord {
    int location = 0;
    double se_sum = 0.0;
    double objective = 0.0;
    int connections = 0;
    std::vector<double> per_ue_se;
};

struct EvalReport {
    std::string method;
    std::vector<LocationRecord> records;
    double mean_se_sum = 0.0;
    double mean_objective = 0.0;
    double mean_connections = 0.0;
    std::vector<double> se_sum_cdf;      // sorted per-location SE sums
    std::vector<double> connections_cdf; // sorted per-location counts
};

using Clusterer = std::function<ClusterAssignment(const Matrix& beta, const PilotPlan& plan,
                                                  const UEDrop& drop)>;

/// Shared evaluation loop: per test location rebuild the pilot plan from its
/// realization, form clusters with the given rule, allocate power, and score.
EvalReport evaluate_with(const Dataset& ds, const ExperimentConfig& cfg, const std::string& tag,
                         const Clusterer& make_clusters);

EvalReport evaluate_baseline(const Dataset& ds, const ExperimentConfig& cfg);
EvalReport evaluate_master_only(const Dataset& ds, const ExperimentConfig& cfg);

/// Threshold-rule evaluation of a trained policy. Refuses a checkpoint whose
/// output size does not match the scenario.
EvalReport evaluate_policy(const Dataset& ds, const ExperimentConfig& cfg, const Checkpoint& ckpt);

/// Line-oriented plot file: AP/UE positions and the active links of one
/// test location.
void export_connection_map(std::ostream& os, const ExperimentConfig& cfg, const Dataset& ds,
                           int location, const std::string& tag, const ClusterAssignment& clusters);

void write_report_csv(std::ostream& os, const ExperimentConfig& cfg, const EvalReport& report);
void write_cdf_csv(std::ostream& os, const ExperimentConfig& cfg, const EvalReport& report);
void write_history_csv(std::ostream& os, const ExperimentConfig& cfg,
                       const std::vector<EpochStats>& history);

// Command bodies shared by the CLI and the acceptance suite. Each returns a
// process exit status and reports problems on stderr.
int run_baseline(const std::string& config_path, std::optional<uint64_t> seed_override,
                 const std::string& out_dir, int map_location = -1);
int run_train(const std::string& config_path, std::optional<uint64_t> seed_override,
              const std::string& out_dir);
int run_eval(const std::string& config_path, std::optional<uint64_t> seed_override,
             const std::string& out_dir, const std::string& checkpoint_path, int map_location = -1);
int run_validate(const std::string& config_path, std::optional<uint64_t> seed_override);
int run_dataset(const std::string& config_path, std::optional<uint64_t> seed_override,
                const std::string& out_dir, bool inspect);

} // namespace cfm
