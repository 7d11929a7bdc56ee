#include "caim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "caim/errors.hpp"
#include "caim/rng.hpp"
#include "caim/svg.hpp"

namespace caim {

namespace {

namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";
constexpr double kHitTol = 1e-9;

std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "wiener") return NoiseKind::Wiener;
    if (name == "per_step") return NoiseKind::PerStep;
    throw ConfigError("integrator.noise_kind must be 'wiener' or 'per_step', got '" + name + "'");
}

std::string noise_kind_name(NoiseKind kind) { return kind == NoiseKind::Wiener ? "wiener" : "per_step"; }

NormMode norm_mode_from_name(const std::string& name) {
    if (name == "l2") return NormMode::L2;
    if (name == "l1") return NormMode::L1;
    throw ConfigError("controller.norm_mode must be 'l2' or 'l1', got '" + name + "'");
}

JNormKind j_norm_from_name(const std::string& name) {
    if (name == "max_abs") return JNormKind::MaxAbsEntry;
    if (name == "max_row_sum") return JNormKind::MaxRowSum;
    throw ConfigError("metrics.j_norm must be 'max_abs' or 'max_row_sum', got '" + name + "'");
}

template <typename T>
T get_or(const nlohmann::json& doc, const char* key, T fallback) {
    if (!doc.contains(key)) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& err) {
        throw ConfigError(std::string("config field '") + key + "': " + err.what());
    }
}

}  // namespace

Scenario scenario_from_name(const std::string& name) {
    if (name == "compare") return Scenario::Compare;
    if (name == "mu_sweep") return Scenario::MuSweep;
    if (name == "tau_sweep") return Scenario::TauSweep;
    if (name == "restart_sweep") return Scenario::RestartSweep;
    if (name == "noise_sweep") return Scenario::NoiseSweep;
    if (name == "single_run") return Scenario::SingleRun;
    if (name == "theory_check") return Scenario::TheoryCheck;
    throw ConfigError("unknown scenario '" + name + "'");
}

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Compare: return "compare";
        case Scenario::MuSweep: return "mu_sweep";
        case Scenario::TauSweep: return "tau_sweep";
        case Scenario::RestartSweep: return "restart_sweep";
        case Scenario::NoiseSweep: return "noise_sweep";
        case Scenario::SingleRun: return "single_run";
        case Scenario::TheoryCheck: return "theory_check";
    }
    return "?";
}

SvgKind svg_kind_from_name(const std::string& name) {
    if (name == "energy_trace") return SvgKind::EnergyTrace;
    if (name == "sweep_curve") return SvgKind::SweepCurve;
    if (name == "mu_trace") return SvgKind::MuTrace;
    throw ConfigError("unknown plot kind '" + name + "' (energy_trace|sweep_curve|mu_trace)");
}

void ExperimentConfig::validate() const {
    std::vector<std::string> faults;
    const bool needs_sweep = scenario == Scenario::MuSweep || scenario == Scenario::TauSweep ||
                             scenario == Scenario::RestartSweep || scenario == Scenario::NoiseSweep ||
                             scenario == Scenario::TheoryCheck;
    if (needs_sweep && sweep.empty()) faults.push_back("sweep: axis must be non-empty for sweep scenarios");
    if (restarts < 1) faults.push_back("restarts: must be >= 1");
    if (problem.generate) {
        if (problem.n < 1) faults.push_back("problem.generate.n: must be >= 1");
        if (problem.instances < 1) faults.push_back("problem.generate.instances: must be >= 1");
    } else if (problem.file.empty()) {
        faults.push_back("problem.file: path required when not generating");
    }
    if ((scenario == Scenario::Compare || scenario == Scenario::TauSweep) && !controller) {
        faults.push_back("controller: required for scenario " + scenario_name(scenario));
    }
    if (scenario == Scenario::RestartSweep) {
        for (double v : sweep) {
            if (v < 1.0 || v > static_cast<double>(restarts)) {
                faults.push_back("sweep: restart counts must lie in [1, restarts]");
                break;
            }
        }
    }
    if (scenario == Scenario::TheoryCheck && grid_res < 11) faults.push_back("grid_res: must be >= 11");
    if (!(mu_baseline >= 0.0)) faults.push_back("mu: must be >= 0");

    try {
        model.validate();
    } catch (const std::exception& err) {
        faults.push_back(err.what());
    }
    try {
        integrator.validate();
    } catch (const std::exception& err) {
        faults.push_back(err.what());
    }
    if (controller) {
        try {
            controller->validate();
        } catch (const std::exception& err) {
            faults.push_back(err.what());
        }
        if (controller->tau < integrator.dt) faults.push_back("controller.tau: must be >= integrator.dt");
    }
    if (!faults.empty()) {
        std::string msg = "invalid experiment config:";
        for (const auto& f : faults) msg += "\n  - " + f;
        throw ConfigError(msg);
    }
}

nlohmann::json ExperimentConfig::canonical_json() const {
    nlohmann::json doc;
    doc["scenario"] = scenario_name(scenario);
    doc["model"] = {{"family", family_name(model.family)},   {"brim_bound", model.brim_bound},
                    {"brim_scale", model.brim_scale},        {"rosc_slope", model.rosc_slope},
                    {"rosc_rho", model.rosc_rho},            {"go_epsilon", model.go_epsilon}};
    if (problem.generate) {
        doc["problem"] = {{"generate",
                           {{"n", problem.n},
                            {"instances", problem.instances},
                            {"seed", problem.seed},
                            {"include_zero", problem.include_zero}}}};
    } else {
        doc["problem"] = {{"file", problem.file}};
    }
    doc["integrator"] = {{"dt", integrator.dt},
                         {"max_time", integrator.max_time},
                         {"noise_gamma", integrator.noise_gamma},
                         {"record_every", integrator.record_every},
                         {"noise_kind", noise_kind_name(integrator.noise_kind)},
                         {"convergence",
                          {{"enabled", integrator.convergence.enabled},
                           {"stop_run", integrator.convergence.stop_run},
                           {"window", integrator.convergence.window},
                           {"threshold", integrator.convergence.threshold}}}};
    if (controller) {
        nlohmann::json ctrl = {{"beta", controller->beta},
                               {"eta", controller->eta},
                               {"tau", controller->tau},
                               {"mu_prime", controller->mu_prime},
                               {"clip_bound", controller->clip_bound},
                               {"norm_mode", controller->norm_mode == NormMode::L2 ? "l2" : "l1"},
                               {"grad_floor", controller->grad_floor},
                               {"reference_node_mu", controller->reference_node_mu},
                               {"literal_scalar_norm", controller->literal_scalar_norm}};
        if (controller->sensor) {
            nlohmann::json sens = {{"oversample", controller->sensor->oversample},
                                   {"period", controller->sensor->period},
                                   {"amplitude", controller->sensor->amplitude}};
            if (controller->sensor->quant_bits) sens["quant_bits"] = *controller->sensor->quant_bits;
            ctrl["sensor"] = sens;
        }
        doc["controller"] = ctrl;
    }
    doc["metrics"] = {{"j_norm", metrics.j_norm == JNormKind::MaxAbsEntry ? "max_abs" : "max_row_sum"},
                      {"success_constant", metrics.success_constant}};
    doc["mu"] = mu_baseline;
    doc["sweep"] = sweep;
    doc["restarts"] = restarts;
    doc["master_seed"] = master_seed;
    doc["augment_bias"] = augment_bias_node;
    doc["oracle"] = compute_oracle;
    doc["grid_res"] = grid_res;
    doc["record_states"] = record_states;
    doc["readout"] = readout_final ? "final" : "best";
    return doc;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    ExperimentConfig cfg;
    if (!doc.contains("scenario")) throw ConfigError("config field 'scenario' is required");
    cfg.scenario = scenario_from_name(doc.at("scenario").get<std::string>());

    if (doc.contains("model")) {
        const auto& m = doc.at("model");
        cfg.model.family = family_from_name(get_or<std::string>(m, "family", "oim"));
        cfg.model.brim_bound = get_or(m, "brim_bound", cfg.model.brim_bound);
        cfg.model.brim_scale = get_or(m, "brim_scale", cfg.model.brim_scale);
        cfg.model.rosc_slope = get_or(m, "rosc_slope", cfg.model.rosc_slope);
        cfg.model.rosc_rho = get_or(m, "rosc_rho", cfg.model.rosc_rho);
        cfg.model.go_epsilon = get_or(m, "go_epsilon", cfg.model.go_epsilon);
    }

    if (doc.contains("problem")) {
        const auto& pr = doc.at("problem");
        if (pr.contains("generate")) {
            const auto& g = pr.at("generate");
            cfg.problem.generate = true;
            cfg.problem.n = get_or(g, "n", cfg.problem.n);
            cfg.problem.instances = get_or(g, "instances", cfg.problem.instances);
            cfg.problem.seed = get_or(g, "seed", cfg.problem.seed);
            cfg.problem.include_zero = get_or(g, "include_zero", cfg.problem.include_zero);
        } else if (pr.contains("file")) {
            cfg.problem.generate = false;
            cfg.problem.file = pr.at("file").get<std::string>();
        } else {
            throw ConfigError("problem: expected 'generate' or 'file'");
        }
    }

    if (doc.contains("integrator")) {
        const auto& it = doc.at("integrator");
        cfg.integrator.dt = get_or(it, "dt", cfg.integrator.dt);
        cfg.integrator.max_time = get_or(it, "max_time", cfg.integrator.max_time);
        cfg.integrator.noise_gamma = get_or(it, "noise_gamma", cfg.integrator.noise_gamma);
        cfg.integrator.record_every = get_or(it, "record_every", cfg.integrator.record_every);
        if (it.contains("noise_kind")) {
            cfg.integrator.noise_kind = noise_kind_from_name(it.at("noise_kind").get<std::string>());
        }
        if (it.contains("convergence")) {
            const auto& cv = it.at("convergence");
            cfg.integrator.convergence.enabled = get_or(cv, "enabled", cfg.integrator.convergence.enabled);
            cfg.integrator.convergence.stop_run = get_or(cv, "stop_run", cfg.integrator.convergence.stop_run);
            cfg.integrator.convergence.window = get_or(cv, "window", cfg.integrator.convergence.window);
            cfg.integrator.convergence.threshold =
                get_or(cv, "threshold", cfg.integrator.convergence.threshold);
        }
    }

    if (doc.contains("controller") && !doc.at("controller").is_null()) {
        const auto& ct = doc.at("controller");
        ControllerConfig ctrl;
        ctrl.beta = get_or(ct, "beta", ctrl.beta);
        ctrl.eta = get_or(ct, "eta", ctrl.eta);
        ctrl.tau = get_or(ct, "tau", ctrl.tau);
        ctrl.mu_prime = get_or(ct, "mu_prime", ctrl.mu_prime);
        ctrl.clip_bound = get_or(ct, "clip_bound", ctrl.clip_bound);
        if (ct.contains("norm_mode")) ctrl.norm_mode = norm_mode_from_name(ct.at("norm_mode").get<std::string>());
        ctrl.grad_floor = get_or(ct, "grad_floor", ctrl.grad_floor);
        ctrl.reference_node_mu = get_or(ct, "reference_node_mu", ctrl.reference_node_mu);
        ctrl.literal_scalar_norm = get_or(ct, "literal_scalar_norm", ctrl.literal_scalar_norm);
        if (ct.contains("sensor") && !ct.at("sensor").is_null()) {
            WaveformConfig sens;
            const auto& sj = ct.at("sensor");
            sens.oversample = get_or(sj, "oversample", sens.oversample);
            sens.period = get_or(sj, "period", sens.period);
            sens.amplitude = get_or(sj, "amplitude", sens.amplitude);
            if (sj.contains("quant_bits")) sens.quant_bits = sj.at("quant_bits").get<int>();
            ctrl.sensor = sens;
        }
        cfg.controller = ctrl;
    }

    if (doc.contains("metrics")) {
        const auto& mt = doc.at("metrics");
        if (mt.contains("j_norm")) cfg.metrics.j_norm = j_norm_from_name(mt.at("j_norm").get<std::string>());
        cfg.metrics.success_constant = get_or(mt, "success_constant", cfg.metrics.success_constant);
    }

    cfg.mu_baseline = get_or(doc, "mu", cfg.mu_baseline);
    cfg.sweep = get_or(doc, "sweep", cfg.sweep);
    cfg.restarts = get_or(doc, "restarts", cfg.restarts);
    cfg.master_seed = get_or(doc, "master_seed", cfg.master_seed);
    cfg.out_dir = get_or<std::string>(doc, "out_dir", cfg.out_dir);
    cfg.augment_bias_node = get_or(doc, "augment_bias", cfg.augment_bias_node);
    cfg.compute_oracle = get_or(doc, "oracle", cfg.compute_oracle);
    cfg.grid_res = get_or(doc, "grid_res", cfg.grid_res);
    cfg.record_states = get_or(doc, "record_states", cfg.record_states);
    if (doc.contains("readout")) {
        const std::string readout = doc.at("readout").get<std::string>();
        if (readout != "best" && readout != "final") {
            throw ConfigError("readout must be 'best' or 'final', got '" + readout + "'");
        }
        cfg.readout_final = readout == "final";
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw ConfigError(path + ": " + err.what());
    }
    return parse_experiment_config(doc);
}

std::string config_hash_hex(const nlohmann::json& canonical) {
    const std::string text = canonical.dump();
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

int experiment_thread_count() {
    const char* env = std::getenv("CAIM_THREADS");
    if (!env) return 1;
    const int v = std::atoi(env);
    return v >= 1 ? v : 1;
}

namespace {

struct Machines {
    bool aim = false;
    bool caim = false;
};

Machines machines_for(const ExperimentConfig& cfg) {
    Machines m;
    switch (cfg.scenario) {
        case Scenario::Compare:
            m.aim = true;
            m.caim = true;
            break;
        case Scenario::TauSweep:
            m.caim = true;
            break;
        case Scenario::SingleRun:
            m.aim = !cfg.controller;
            m.caim = cfg.controller.has_value();
            break;
        default:
            m.aim = true;
            m.caim = cfg.controller.has_value();
            break;
    }
    return m;
}

struct Cell {
    bool caim = false;
    int instance = 0;
    int restart = 0;
    int sweep_idx = 0;  // -1 when no axis
};

struct InstanceData {
    IsingProblem problem;           // the problem actually integrated
    std::optional<double> h0;
};

RunRow execute_cell(const ExperimentConfig& cfg, const Cell& cell, const InstanceData& inst) {
    const double sweep_value = cell.sweep_idx >= 0 ? cfg.sweep[cell.sweep_idx] : 0.0;

    IntegratorConfig icfg = cfg.integrator;
    icfg.record_states = false;
    icfg.seed = mix_seed(cfg.master_seed, static_cast<std::uint64_t>(cell.instance),
                         static_cast<std::uint64_t>(cell.restart));
    if (cfg.scenario == Scenario::NoiseSweep) icfg.noise_gamma = sweep_value;

    const int n_used = inst.problem.n;
    std::vector<double> psi0 = sample_initial(cfg.model, n_used, icfg.seed);

    RunResult res;
    if (!cell.caim) {
        double mu = cfg.mu_baseline;
        if (cfg.scenario == Scenario::MuSweep) mu = sweep_value;
        res = run_autonomous(cfg.model, inst.problem, std::move(psi0), mu, icfg);
    } else {
        ControllerConfig ctrl = *cfg.controller;
        if (cfg.scenario == Scenario::MuSweep) ctrl.mu_prime = std::max(sweep_value, 1e-12);
        if (cfg.scenario == Scenario::TauSweep) ctrl.tau = sweep_value;
        if (cfg.augment_bias_node) ctrl.reference_node = 0;
        res = run_controlled(cfg.model, inst.problem, std::move(psi0), ctrl, icfg).run;
    }

    const double t_run = res.converged ? *res.trajectory.converged_at : res.t_end;
    const double scored_h =
        cfg.readout_final ? hamiltonian(inst.problem, decide(cfg.model, res.final_psi)) : res.best_h;
    const RunMetrics rm = compute_run_metrics(inst.problem, scored_h, t_run, res.converged, cfg.metrics);

    RunRow row;
    row.machine = cell.caim ? "caim" : "aim";
    row.instance = cell.instance;
    row.restart = cell.restart;
    row.sweep_value = sweep_value;
    row.seed = icfg.seed;
    row.best_h = scored_h;
    row.h0 = inst.h0;
    if (inst.h0) row.hit = std::abs(scored_h - *inst.h0) <= kHitTol;
    row.r = rm.r;
    row.p_hat = rm.p_hat;
    row.t_run = rm.t_run;
    row.tts = rm.tts;
    row.converged = rm.converged;
    return row;
}

RunMetrics row_to_metrics(const RunRow& row) {
    RunMetrics rm;
    rm.best_h = row.best_h;
    rm.r = row.r;
    rm.p_hat = row.p_hat;
    rm.t_run = row.t_run;
    rm.tts = row.tts;
    rm.converged = row.converged;
    return rm;
}

void aggregate_rows(const ExperimentConfig& cfg, const std::vector<RunRow>& rows,
                    std::vector<AggregateRow>& out) {
    // deterministic order: machine (aim first), then sweep axis order
    std::vector<std::pair<std::string, double>> keys;
    for (const auto& row : rows) {
        const auto key = std::make_pair(row.machine, row.sweep_value);
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
    std::stable_sort(keys.begin(), keys.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    for (const auto& [machine, sweep_value] : keys) {
        std::vector<RunMetrics> metrics;
        std::optional<double> h0;
        bool any_h0 = true;
        for (const auto& row : rows) {
            if (row.machine != machine || row.sweep_value != sweep_value) continue;
            metrics.push_back(row_to_metrics(row));
            if (!row.h0) any_h0 = false;
        }
        if (metrics.empty()) continue;
        // exact success only when every run in the group had an oracle value;
        // feed aggregate() with per-row hits by reusing best_h against h0
        AggregateSummary summary;
        if (any_h0) {
            long hits = 0;
            for (const auto& row : rows) {
                if (row.machine != machine || row.sweep_value != sweep_value) continue;
                if (row.hit && *row.hit) ++hits;
            }
            summary = aggregate(metrics, std::nullopt);
            summary.exact_success = static_cast<double>(hits) / static_cast<double>(metrics.size());
        } else {
            summary = aggregate(metrics, std::nullopt);
        }
        summary.instances = cfg.problem.generate ? cfg.problem.instances : 1;
        summary.restarts = cfg.restarts;
        out.push_back({machine, sweep_value, summary});
    }
}

// best-of-first-k aggregates for the restart sweep: per instance, the best
// Hamiltonian over the first k restarts at the summed runtime.
void aggregate_restart_sweep(const ExperimentConfig& cfg, const std::vector<RunRow>& rows,
                             const std::vector<IsingProblem>& problems, std::vector<AggregateRow>& out) {
    std::vector<std::string> machines;
    for (const auto& row : rows) {
        if (std::find(machines.begin(), machines.end(), row.machine) == machines.end()) {
            machines.push_back(row.machine);
        }
    }
    std::sort(machines.begin(), machines.end());
    const int instances = static_cast<int>(problems.size());

    for (const auto& machine : machines) {
        for (double axis : cfg.sweep) {
            const int k = static_cast<int>(std::lround(axis));
            std::vector<RunMetrics> per_instance;
            long hits = 0;
            bool have_h0 = true;
            for (int inst = 0; inst < instances; ++inst) {
                double best_h = std::numeric_limits<double>::infinity();
                double total_t = 0.0;
                bool all_conv = true;
                std::optional<double> h0;
                int found = 0;
                for (const auto& row : rows) {
                    if (row.machine != machine || row.instance != inst || row.restart >= k) continue;
                    best_h = std::min(best_h, row.best_h);
                    total_t += row.t_run;
                    all_conv = all_conv && row.converged;
                    h0 = row.h0;
                    ++found;
                }
                if (found == 0) continue;
                per_instance.push_back(
                    compute_run_metrics(problems[inst], best_h, total_t, all_conv, cfg.metrics));
                if (h0) {
                    if (std::abs(best_h - *h0) <= kHitTol) ++hits;
                } else {
                    have_h0 = false;
                }
            }
            if (per_instance.empty()) continue;
            AggregateSummary summary = aggregate(per_instance, std::nullopt);
            summary.instances = instances;
            summary.restarts = k;
            if (have_h0) summary.exact_success = static_cast<double>(hits) / per_instance.size();
            out.push_back({machine, axis, summary});
        }
    }
}

}  // namespace

ResultBundle run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    ResultBundle bundle;
    const nlohmann::json canonical = cfg.canonical_json();
    bundle.provenance = {{"tool", "caim"},
                         {"version", kToolVersion},
                         {"config_hash", config_hash_hex(canonical)},
                         {"master_seed", cfg.master_seed},
                         {"config", canonical}};

    // instantiate the problems
    const int instances = cfg.problem.generate ? cfg.problem.instances : 1;
    std::vector<InstanceData> data;
    data.reserve(instances);
    for (int inst = 0; inst < instances; ++inst) {
        IsingProblem base = cfg.problem.generate
                                ? generate_spinmodel(cfg.problem.n,
                                                     mix_seed(cfg.problem.seed, static_cast<std::uint64_t>(inst)),
                                                     cfg.problem.include_zero)
                                : load_problem(cfg.problem.file);
        InstanceData d;
        d.problem = cfg.augment_bias_node ? augment_bias(base) : std::move(base);
        bundle.problems.push_back(d.problem);
        data.push_back(std::move(d));
    }

    if (cfg.scenario == Scenario::TheoryCheck) {
        for (int inst = 0; inst < instances; ++inst) {
            for (double mu : cfg.sweep) {
                const auto report = equivalence_check_grid(cfg.model, data[inst].problem, mu, cfg.grid_res);
                bundle.equivalence.push_back(
                    {inst, mu, report.min_energy_ground, report.min_energy_excited, report.equivalent});
            }
        }
        return bundle;
    }

    // oracle ground energies (skipped transparently beyond the cap)
    if (cfg.compute_oracle) {
        for (auto& d : data) {
            if (d.problem.n <= kBruteForceMaxSpins) d.h0 = brute_force_ground(d.problem).h0;
        }
    }

    if (cfg.scenario == Scenario::SingleRun) {
        IntegratorConfig icfg = cfg.integrator;
        icfg.record_states = cfg.record_states;
        icfg.seed = mix_seed(cfg.master_seed, 0, 0);
        std::vector<double> psi0 = sample_initial(cfg.model, data[0].problem.n, icfg.seed);

        RunResult res;
        if (!cfg.controller) {
            res = run_autonomous(cfg.model, data[0].problem, psi0, cfg.mu_baseline, icfg);
        } else {
            ControllerConfig ctrl = *cfg.controller;
            if (cfg.augment_bias_node) ctrl.reference_node = 0;
            ControlledRunResult cres = run_controlled(cfg.model, data[0].problem, psi0, ctrl, icfg);
            bundle.mu_trace = std::move(cres.mu_trace);
            res = std::move(cres.run);
        }
        bundle.trajectory = res.trajectory;
        if (cfg.model.family == Family::Go) {
            bundle.provenance["go_zero_crossings"] = res.go_zero_crossings;
        }

        const double t_run = res.converged ? *res.trajectory.converged_at : res.t_end;
        const double scored_h =
            cfg.readout_final ? hamiltonian(data[0].problem, decide(cfg.model, res.final_psi)) : res.best_h;
        const RunMetrics rm = compute_run_metrics(data[0].problem, scored_h, t_run, res.converged, cfg.metrics);
        RunRow row;
        row.machine = cfg.controller ? "caim" : "aim";
        row.seed = icfg.seed;
        row.best_h = scored_h;
        row.h0 = data[0].h0;
        if (data[0].h0) row.hit = std::abs(scored_h - *data[0].h0) <= kHitTol;
        row.r = rm.r;
        row.p_hat = rm.p_hat;
        row.t_run = rm.t_run;
        row.tts = rm.tts;
        row.converged = rm.converged;
        bundle.runs.push_back(std::move(row));
        aggregate_rows(cfg, bundle.runs, bundle.aggregates);
        return bundle;
    }

    // build the cell grid in deterministic output order
    const Machines machines = machines_for(cfg);
    const bool has_axis = !cfg.sweep.empty() && cfg.scenario != Scenario::RestartSweep;
    const int sweep_count = has_axis ? static_cast<int>(cfg.sweep.size()) : 1;

    std::vector<Cell> cells;
    for (int sw = 0; sw < sweep_count; ++sw) {
        for (int inst = 0; inst < instances; ++inst) {
            for (int restart = 0; restart < cfg.restarts; ++restart) {
                if (machines.aim) cells.push_back({false, inst, restart, has_axis ? sw : -1});
                if (machines.caim) cells.push_back({true, inst, restart, has_axis ? sw : -1});
            }
        }
    }

    bundle.runs.resize(cells.size());
    const int threads = std::min<int>(experiment_thread_count(), static_cast<int>(cells.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            bundle.runs[i] = execute_cell(cfg, cells[i], data[cells[i].instance]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= cells.size()) return;
                try {
                    bundle.runs[i] = execute_cell(cfg, cells[i], data[cells[i].instance]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    if (cfg.scenario == Scenario::RestartSweep) {
        aggregate_restart_sweep(cfg, bundle.runs, bundle.problems, bundle.aggregates);
    } else {
        aggregate_rows(cfg, bundle.runs, bundle.aggregates);
    }
    return bundle;
}

void emit_csv(const ResultBundle& bundle, const std::string& dir) {
    fs::create_directories(dir);

    {
        std::ofstream out(fs::path(dir) / "runs.csv");
        if (!out) throw ParseError("emit_csv: cannot open runs.csv under " + dir);
        out << "machine,instance,restart,sweep,seed,best_h,h0,hit,r,p_hat,t_run,tts,converged\n";
        for (const auto& row : bundle.runs) {
            out << row.machine << ',' << row.instance << ',' << row.restart << ',' << fmt12(row.sweep_value)
                << ',' << row.seed << ',' << fmt12(row.best_h) << ',';
            if (row.h0) out << fmt12(*row.h0);
            out << ',';
            if (row.hit) out << (*row.hit ? 1 : 0);
            out << ',' << fmt12(row.r) << ',' << fmt12(row.p_hat) << ',' << fmt12(row.t_run) << ','
                << fmt12(row.tts) << ',' << (row.converged ? 1 : 0) << "\n";
        }
    }

    {
        std::ofstream out(fs::path(dir) / "aggregates.csv");
        if (!out) throw ParseError("emit_csv: cannot open aggregates.csv under " + dir);
        out << "machine,sweep,instances,restarts,runs,mean_r,max_r,exact_success,p_hat_mean,t_run_mean,"
               "tts_median\n";
        for (const auto& row : bundle.aggregates) {
            out << row.machine << ',' << fmt12(row.sweep_value) << ',' << row.summary.instances << ','
                << row.summary.restarts << ',' << row.summary.runs << ',' << fmt12(row.summary.mean_r) << ','
                << fmt12(row.summary.max_r) << ',';
            if (row.summary.exact_success) out << fmt12(*row.summary.exact_success);
            out << ',' << fmt12(row.summary.p_hat_mean) << ',' << fmt12(row.summary.t_run_mean) << ','
                << fmt12(row.summary.tts_median) << "\n";
        }
    }

    if (!bundle.equivalence.empty()) {
        std::ofstream out(fs::path(dir) / "equivalence.csv");
        out << "instance,mu,min_ground,min_excited,equivalent\n";
        for (const auto& row : bundle.equivalence) {
            out << row.instance << ',' << fmt12(row.mu) << ',' << fmt12(row.min_ground) << ','
                << fmt12(row.min_excited) << ',' << (row.equivalent ? 1 : 0) << "\n";
        }
    }

    if (bundle.trajectory) write_trajectory_csv(*bundle.trajectory, (fs::path(dir) / "trajectory.csv").string());
    if (bundle.trajectory && !bundle.trajectory->psi_snapshots.empty()) {
        write_state_snapshots_jsonl(*bundle.trajectory, (fs::path(dir) / "states.jsonl").string());
    }
    if (bundle.mu_trace) write_mu_trace_csv(*bundle.mu_trace, (fs::path(dir) / "mu_trace.csv").string());

    if (!bundle.problems.empty()) {
        fs::create_directories(fs::path(dir) / "problems");
        for (std::size_t i = 0; i < bundle.problems.size(); ++i) {
            store_problem(bundle.problems[i],
                          (fs::path(dir) / "problems" / ("instance_" + std::to_string(i) + ".json")).string());
        }
    }
}

namespace {

nlohmann::json bundle_to_json(const ResultBundle& bundle) {
    nlohmann::json doc;
    doc["provenance"] = bundle.provenance;

    auto runs = nlohmann::json::array();
    for (const auto& row : bundle.runs) {
        nlohmann::json r = {{"machine", row.machine}, {"instance", row.instance},
                            {"restart", row.restart}, {"sweep", row.sweep_value},
                            {"seed", row.seed},       {"best_h", row.best_h},
                            {"r", row.r},             {"p_hat", row.p_hat},
                            {"t_run", row.t_run},     {"tts", row.tts},
                            {"converged", row.converged}};
        if (row.h0) r["h0"] = *row.h0;
        if (row.hit) r["hit"] = *row.hit;
        runs.push_back(std::move(r));
    }
    doc["runs"] = std::move(runs);

    auto aggs = nlohmann::json::array();
    for (const auto& row : bundle.aggregates) {
        nlohmann::json a = {{"machine", row.machine},
                            {"sweep", row.sweep_value},
                            {"instances", row.summary.instances},
                            {"restarts", row.summary.restarts},
                            {"runs", row.summary.runs},
                            {"mean_r", row.summary.mean_r},
                            {"max_r", row.summary.max_r},
                            {"pHat_mean", row.summary.p_hat_mean},
                            {"tRun_mean", row.summary.t_run_mean},
                            {"tts_median", row.summary.tts_median}};
        if (row.summary.exact_success) a["exact_success"] = *row.summary.exact_success;
        aggs.push_back(std::move(a));
    }
    doc["aggregates"] = std::move(aggs);

    if (!bundle.equivalence.empty()) {
        auto eq = nlohmann::json::array();
        for (const auto& row : bundle.equivalence) {
            eq.push_back({{"instance", row.instance},
                          {"mu", row.mu},
                          {"min_ground", row.min_ground},
                          {"min_excited", row.min_excited},
                          {"equivalent", row.equivalent}});
        }
        doc["equivalence"] = std::move(eq);
    }

    if (bundle.trajectory) {
        nlohmann::json tj;
        auto samples = nlohmann::json::array();
        for (const auto& s : bundle.trajectory->samples) {
            samples.push_back({s.t, s.e, s.k, s.r, s.h_decision});
        }
        tj["samples"] = std::move(samples);
        if (bundle.trajectory->converged_at) tj["converged_at"] = *bundle.trajectory->converged_at;
        doc["trajectory"] = std::move(tj);
    }

    if (bundle.mu_trace) {
        auto trace = nlohmann::json::array();
        for (const auto& slice : *bundle.mu_trace) {
            trace.push_back({{"k", slice.k}, {"t_start", slice.t_start}, {"mu", slice.mu}});
        }
        doc["mu_trace"] = std::move(trace);
    }

    if (!bundle.problems.empty()) {
        auto probs = nlohmann::json::array();
        for (const auto& p : bundle.problems) {
            auto rows = nlohmann::json::array();
            for (int i = 0; i < p.n; ++i) {
                auto row = nlohmann::json::array();
                for (int k = 0; k < p.n; ++k) row.push_back(p.coupling(i, k));
                rows.push_back(std::move(row));
            }
            probs.push_back({{"n", p.n}, {"J", std::move(rows)}, {"h", p.h}});
        }
        doc["problems"] = std::move(probs);
    }
    return doc;
}

}  // namespace

void emit_json(const ResultBundle& bundle, const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw ParseError("emit_json: cannot open " + path);
    out << bundle_to_json(bundle).dump(1) << "\n";
}

ResultBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_bundle: cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& err) {
        throw ParseError(path + ": " + err.what());
    }

    ResultBundle bundle;
    bundle.provenance = doc.value("provenance", nlohmann::json::object());
    for (const auto& r : doc.value("runs", nlohmann::json::array())) {
        RunRow row;
        row.machine = r.value("machine", "aim");
        row.instance = r.value("instance", 0);
        row.restart = r.value("restart", 0);
        row.sweep_value = r.value("sweep", 0.0);
        row.seed = r.value("seed", std::uint64_t{0});
        row.best_h = r.value("best_h", 0.0);
        if (r.contains("h0")) row.h0 = r.at("h0").get<double>();
        if (r.contains("hit")) row.hit = r.at("hit").get<bool>();
        row.r = r.value("r", 0.0);
        row.p_hat = r.value("p_hat", 0.0);
        row.t_run = r.value("t_run", 0.0);
        row.tts = r.value("tts", 0.0);
        row.converged = r.value("converged", false);
        bundle.runs.push_back(std::move(row));
    }
    for (const auto& a : doc.value("aggregates", nlohmann::json::array())) {
        AggregateRow row;
        row.machine = a.value("machine", "aim");
        row.sweep_value = a.value("sweep", 0.0);
        row.summary.instances = a.value("instances", 0);
        row.summary.restarts = a.value("restarts", 0);
        row.summary.runs = a.value("runs", 0L);
        row.summary.mean_r = a.value("mean_r", 0.0);
        row.summary.max_r = a.value("max_r", 0.0);
        if (a.contains("exact_success")) row.summary.exact_success = a.at("exact_success").get<double>();
        row.summary.p_hat_mean = a.value("pHat_mean", 0.0);
        row.summary.t_run_mean = a.value("tRun_mean", 0.0);
        row.summary.tts_median = a.value("tts_median", 0.0);
        bundle.aggregates.push_back(std::move(row));
    }
    for (const auto& e : doc.value("equivalence", nlohmann::json::array())) {
        bundle.equivalence.push_back({e.value("instance", 0), e.value("mu", 0.0), e.value("min_ground", 0.0),
                                      e.value("min_excited", 0.0), e.value("equivalent", false)});
    }
    if (doc.contains("trajectory")) {
        Trajectory traj;
        for (const auto& s : doc.at("trajectory").value("samples", nlohmann::json::array())) {
            traj.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>(),
                                    s.at(3).get<double>(), s.at(4).get<double>()});
        }
        if (doc.at("trajectory").contains("converged_at")) {
            traj.converged_at = doc.at("trajectory").at("converged_at").get<double>();
        }
        bundle.trajectory = std::move(traj);
    }
    if (doc.contains("mu_trace")) {
        MuTrace trace;
        for (const auto& s : doc.at("mu_trace")) {
            trace.push_back({s.at("k").get<long>(), s.at("t_start").get<double>(),
                             s.at("mu").get<std::vector<double>>()});
        }
        bundle.mu_trace = std::move(trace);
    }
    for (const auto& pj : doc.value("problems", nlohmann::json::array())) {
        bundle.problems.push_back(problem_from_json_text(pj.dump(), path));
    }
    return bundle;
}

void emit_svg(const ResultBundle& bundle, SvgKind kind, const std::string& path) {
    switch (kind) {
        case SvgKind::EnergyTrace: {
            if (!bundle.trajectory || bundle.trajectory->samples.empty()) {
                throw ContractViolation("emit_svg: bundle has no trajectory (run a single_run scenario)");
            }
            SvgPanel panel;
            panel.title = "energy components";
            panel.x_label = "t (phase time)";
            panel.y_label = "energy (dimensionless)";
            SvgSeries e{"E", {}, false}, k{"K", {}, false}, r{"R", {}, false};
            for (const auto& s : bundle.trajectory->samples) {
                e.points.emplace_back(s.t, s.e);
                k.points.emplace_back(s.t, s.k);
                r.points.emplace_back(s.t, s.r);
            }
            panel.series = {e, k, r};
            write_svg_chart(path, "single run energy trace", {panel});
            return;
        }
        case SvgKind::SweepCurve: {
            if (bundle.aggregates.empty()) {
                throw ContractViolation("emit_svg: bundle has no aggregates for a sweep curve");
            }
            std::vector<std::string> machines;
            for (const auto& a : bundle.aggregates) {
                if (std::find(machines.begin(), machines.end(), a.machine) == machines.end()) {
                    machines.push_back(a.machine);
                }
            }
            const bool exact = bundle.aggregates.front().summary.exact_success.has_value();
            SvgPanel success{exact ? "exact success" : "estimated success", "sweep value",
                             exact ? "ground-state hit rate" : "mean P-hat", {}};
            SvgPanel runtime{"mean runtime", "sweep value", "t_run (phase time)", {}};
            SvgPanel tts{"median TTS", "sweep value", "TTS (phase time)", {}};
            for (const auto& machine : machines) {
                SvgSeries s1{machine, {}, false}, s2{machine, {}, false}, s3{machine, {}, false};
                for (const auto& a : bundle.aggregates) {
                    if (a.machine != machine) continue;
                    s1.points.emplace_back(a.sweep_value, a.summary.exact_success
                                                              ? *a.summary.exact_success
                                                              : a.summary.p_hat_mean);
                    s2.points.emplace_back(a.sweep_value, a.summary.t_run_mean);
                    if (std::isfinite(a.summary.tts_median)) {
                        s3.points.emplace_back(a.sweep_value, a.summary.tts_median);
                    }
                }
                success.series.push_back(std::move(s1));
                runtime.series.push_back(std::move(s2));
                if (!s3.points.empty()) tts.series.push_back(std::move(s3));
            }
            std::vector<SvgPanel> panels = {success, runtime};
            if (!tts.series.empty()) panels.push_back(tts);
            write_svg_chart(path, "sweep aggregates", panels);
            return;
        }
        case SvgKind::MuTrace: {
            if (!bundle.mu_trace || bundle.mu_trace->empty()) {
                throw ContractViolation("emit_svg: bundle has no mu trace (controlled single_run)");
            }
            const auto& trace = *bundle.mu_trace;
            const std::size_t n = trace.front().mu.size();
            const double tau = trace.size() > 1 ? trace[1].t_start - trace[0].t_start : 1.0;
            SvgPanel panel{"held injection strengths", "t (phase time)", "mu_i", {}};
            for (std::size_t i = 0; i < n; ++i) {
                SvgSeries s{"mu_" + std::to_string(i), {}, true};
                for (const auto& slice : trace) s.points.emplace_back(slice.t_start, slice.mu[i]);
                s.points.emplace_back(trace.back().t_start + tau, trace.back().mu[i]);
                panel.series.push_back(std::move(s));
            }
            write_svg_chart(path, "controller zero-order hold", {panel});
            return;
        }
    }
}

}  // namespace caim
