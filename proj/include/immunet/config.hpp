#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "immunet/engine.hpp"
#include "immunet/underlay.hpp"

namespace immunet {

enum class RunMode : std::uint8_t { internal, latency, attack };

std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

/// One fully resolved sweep cell.
struct RunSpec {
    std::string trace;
    double immune_ph_pct = 95.0;
    double immune_host_pct = 10.0;
    double initial_infect_pct = 0.01;
    std::uint64_t seed = 1;
    bool defense_enabled = true;
    double frequency_rps = 0.0;  // attack mode only
    std::string label;
};

/// Experiment description: sweep axes plus every engine/topology knob.
/// Scalar JSON values are accepted wherever a sweep list is expected.
struct ExperimentConfig {
    std::string preset;  // empty, or exp1..exp6
    RunMode mode = RunMode::internal;
    std::vector<std::string> traces{"trace1"};
    double scale_factor = 0.02;
    std::vector<double> immune_ph_pct{95.0};
    std::vector<double> immune_host_pct{10.0};
    std::vector<double> initial_infect_pct{0.01};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    bool defense_enabled = true;
    bool baseline_defense_off = false;  // re-run each cell with defense off
    double maintainer_fraction = 0.01;
    EngineParams engine;    // worm + defense knobs ride inside
    TransitStubParams underlay;
    AttackParams attack;    // gatekeeper knobs ride inside
    std::vector<double> attack_frequencies{0.002, 0.01, 0.05, 0.5};
    std::uint32_t n_external = 100;
    std::uint32_t latency_samples = 200;
    std::string output_dir = "out";
};

ExperimentConfig default_config();

/// Overwrite the sweep axes with a published experiment grid (exp1..exp6).
void apply_preset(ExperimentConfig& cfg, const std::string& name);

/// Parse and validate a JSON config document. Unknown keys and
/// out-of-range values raise std::invalid_argument naming the key path.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// IMMUNET_OUTPUT_DIR and IMMUNET_SEED are the only honored variables.
void apply_env_overrides(ExperimentConfig& cfg);

void validate_config(const ExperimentConfig& cfg);

/// Serialize with every default filled in; re-parsing the output yields
/// the same configuration (and the same serialization).
std::string config_to_json(const ExperimentConfig& cfg);

/// Expand the sweep grid into concrete runs, including defense-off
/// baselines when requested. Labels are unique and filesystem-safe.
std::vector<RunSpec> expand_runs(const ExperimentConfig& cfg);

}  // namespace immunet
