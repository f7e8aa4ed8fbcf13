/**
 * @file cfm_cli.cpp
 * @brief Command-line front end: dataset generation, baseline evaluation,
 * policy training and evaluation, and the numerical self-checks.
 */
#include "cfm/harness.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"cell-free massive MIMO downlink simulator with learned user-centric clustering"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string checkpoint_path;
    std::optional<uint64_t> seed_override;
    int map_location = -1;
    bool inspect = false;

    auto add_common = [&](CLI::App* cmd, bool with_out) {
        cmd->add_option("--config", config_path, "experiment configuration file")->required();
        cmd->add_option("--seed", seed_override, "override the master seed");
        if (with_out) cmd->add_option("--out", out_dir, "output directory");
    };

    CLI::App* baseline = app.add_subcommand("baseline", "evaluate the per-pilot strongest-channel heuristic");
    add_common(baseline, true);
    baseline->add_option("--map", map_location, "also export the connection map of this test location");

    CLI::App* train = app.add_subcommand("train", "train the clustering policy and write checkpoint + history");
    add_common(train, true);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a trained checkpoint on the test set");
    add_common(eval, true);
    eval->add_option("--checkpoint", checkpoint_path, "policy checkpoint file")->required();
    eval->add_option("--map", map_location, "also export the connection map of this test location");

    CLI::App* validate = app.add_subcommand("validate", "run the estimation and gradient self-checks");
    add_common(validate, false);

    CLI::App* dataset = app.add_subcommand("dataset", "generate (or inspect) the scenario and UE drops");
    add_common(dataset, true);
    dataset->add_flag("--inspect", inspect, "print a summary instead of writing files");

    CLI11_PARSE(app, argc, argv);

    if (baseline->parsed()) return cfm::run_baseline(config_path, seed_override, out_dir, map_location);
    if (train->parsed()) return cfm::run_train(config_path, seed_override, out_dir);
    if (eval->parsed()) return cfm::run_eval(config_path, seed_override, out_dir, checkpoint_path, map_location);
    if (validate->parsed()) return cfm::run_validate(config_path, seed_override);
    if (dataset->parsed()) return cfm::run_dataset(config_path, seed_override, out_dir, inspect);
    return 1;
}
