#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "caim/aim.hpp"
#include "caim/controller.hpp"
#include "caim/dynamics.hpp"
#include "caim/ising.hpp"
#include "caim/metrics.hpp"

#include "json.hpp"

namespace caim {

enum class Scenario { Compare, MuSweep, TauSweep, RestartSweep, NoiseSweep, SingleRun, TheoryCheck };

Scenario scenario_from_name(const std::string& name);
std::string scenario_name(Scenario s);

struct ProblemSource {
    bool generate = true;
    int n = 10;
    int instances = 1;
    std::uint64_t seed = 1;
    bool include_zero = true;   // SpinModel grid includes 0 by default
    std::string file;           // used when generate == false
};

struct ExperimentConfig {
    Scenario scenario = Scenario::SingleRun;
    AimModel model;
    ProblemSource problem;
    IntegratorConfig integrator;
    std::optional<ControllerConfig> controller;  // absent: autonomous AIM only
    MetricsConfig metrics;
    double mu_baseline = 1.0;     // AIM injection strength (and CAIM mu' unless swept)
    std::vector<double> sweep;    // axis values for sweep scenarios
    int restarts = 1;
    std::uint64_t master_seed = 1;
    std::string out_dir = "results";
    bool augment_bias_node = false;  // move h onto a reference node 0
    bool compute_oracle = true;      // brute-force H0 when n is within the cap
    int grid_res = 41;               // theory_check resolution
    bool record_states = false;
    bool readout_final = false;      // score the final state instead of the best sample

    nlohmann::json canonical_json() const;
    void validate() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

struct RunRow {
    std::string machine;  // "aim" | "caim"
    int instance = 0;
    int restart = 0;
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    double best_h = 0.0;
    std::optional<double> h0;
    std::optional<bool> hit;
    double r = 0.0;
    double p_hat = 0.0;
    double t_run = 0.0;
    double tts = 0.0;
    bool converged = false;
};

struct AggregateRow {
    std::string machine;
    double sweep_value = 0.0;
    AggregateSummary summary;
};

struct EquivalenceRow {
    int instance = 0;
    double mu = 0.0;
    double min_ground = 0.0;
    double min_excited = 0.0;
    bool equivalent = false;
};

struct ResultBundle {
    nlohmann::json provenance;  // config hash, seeds, version; no timestamps
    std::vector<RunRow> runs;
    std::vector<AggregateRow> aggregates;
    std::vector<EquivalenceRow> equivalence;
    std::optional<Trajectory> trajectory;  // single_run
    std::optional<MuTrace> mu_trace;       // single_run with controller
    std::vector<IsingProblem> problems;    // generated instances, for provenance
};

ResultBundle run_experiment(const ExperimentConfig& cfg);

// runs.csv / aggregates.csv / equivalence.csv / trajectory.csv / mu_trace.csv
// under dir, plus problems/instance_<i>.json; 12 significant digits.
void emit_csv(const ResultBundle& bundle, const std::string& dir);
void emit_json(const ResultBundle& bundle, const std::string& path);
ResultBundle load_bundle(const std::string& path);

enum class SvgKind { EnergyTrace, SweepCurve, MuTrace };
SvgKind svg_kind_from_name(const std::string& name);
void emit_svg(const ResultBundle& bundle, SvgKind kind, const std::string& path);

// Deterministic 64-bit FNV-1a over the canonical config text.
std::string config_hash_hex(const nlohmann::json& canonical);

// CAIM_THREADS caps worker threads; unset or invalid means sequential.
int experiment_thread_count();

}  // namespace caim
