#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "caim/aim.hpp"
#include "caim/ising.hpp"
#include "caim/rng.hpp"

namespace caim {

// The SI noise term is ambiguous between a Wiener increment (Gamma*sqrt(dt)
// per step) and a fixed per-step kick of magnitude Gamma; Wiener is default.
enum class NoiseKind { Wiener, PerStep };

struct ConvergenceConfig {
    bool enabled = true;
    bool stop_run = true;      // false: timestamp converged_at but keep evolving
    double window = 0.025;     // sliding-window duration, phase time
    double threshold = 0.025;  // (max - min) / (E_init - E_now) bound
};

struct IntegratorConfig {
    double dt = 1e-2;          // phase time per explicit Euler step
    double max_time = 10.0;
    double noise_gamma = 0.0;
    std::uint64_t seed = 0;
    int record_every = 10;
    bool record_states = false;
    NoiseKind noise_kind = NoiseKind::Wiener;
    ConvergenceConfig convergence;

    void validate() const;
};

struct TrajectorySample {
    double t = 0.0;
    double e = 0.0;
    double k = 0.0;
    double r = 0.0;
    double h_decision = 0.0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    std::vector<std::vector<double>> psi_snapshots;  // parallel to samples when recorded
    std::optional<double> converged_at;
};

struct RunResult {
    Trajectory trajectory;
    std::vector<double> final_psi;
    double t_end = 0.0;
    SpinConfig best_config;   // lowest-H decision over recorded samples
    double best_h = 0.0;
    bool converged = false;
    long go_zero_crossings = 0;  // GO only: steps that crossed its jump at 0
};

// One explicit Euler-Maruyama step. BRIM saturates the drift through
// bound*tanh(scale*drift); OIM wraps phases into [0, 2pi). Throws
// NumericalError naming t and the oscillator on non-finite drift.
std::vector<double> step(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                         const std::vector<double>& mu_vec, const IntegratorConfig& cfg, Rng& noise,
                         double t = 0.0);

// Convergence rule: (max - min of the windowed energies) / (e_init - e_now)
// <= threshold; no net descent yet means false, never a division error.
bool detect_convergence(const std::vector<double>& window_energies, double e_init, double e_now,
                        double threshold = 0.025);

// Per-family initial state: OIM U[0,2pi), BRIM U[-10,10], ROSC U[-1,1],
// GO U[-1,1]. Pure function of (family, n, seed).
std::vector<double> sample_initial(const AimModel& m, int n, std::uint64_t seed);

RunResult run_autonomous(const AimModel& m, const IsingProblem& p, std::vector<double> psi0, double mu,
                         const IntegratorConfig& cfg);

// The CAIM loop plugs in here: called at the start of every step, returns the
// mu vector to hold for that step.
using MuProvider = std::function<const std::vector<double>&(long step_index, double t, const std::vector<double>& psi)>;

RunResult integrate_run(const AimModel& m, const IsingProblem& p, std::vector<double> psi,
                        const IntegratorConfig& cfg, const MuProvider& mu_at);

// Trajectory CSV: header t,E,K,R,H_decision. Optional JSON-lines sidecar with
// one {"t": ..., "psi": [...]} object per recorded snapshot.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
void write_state_snapshots_jsonl(const Trajectory& traj, const std::string& path);

}  // namespace caim
