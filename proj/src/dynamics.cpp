#include "caim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <string>

#include "caim/errors.hpp"

namespace caim {

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676656;

void wrap_oim_phases(std::vector<double>& psi) {
    for (double& phi : psi) {
        phi = std::fmod(phi, kTwoPi);
        if (phi < 0.0) phi += kTwoPi;
    }
}

// Drift for one step, shared by step() and integrate_run(). grad buffers are
// caller-owned workspace; returns via drift.
void compute_drift(const AimModel& m, const std::vector<double>& grad_k, const std::vector<double>& grad_r,
                   const std::vector<double>& mu_vec, double t, std::vector<double>& drift) {
    const std::size_t n = grad_k.size();
    drift.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = -grad_k[i] - mu_vec[i] * grad_r[i];
        if (!std::isfinite(d)) {
            throw NumericalError("non-finite drift at t = " + std::to_string(t) + ", oscillator " +
                                 std::to_string(i));
        }
        if (m.family == Family::Brim) d = m.brim_bound * std::tanh(m.brim_scale * d);
        drift[i] = d;
    }
}

}  // namespace

void IntegratorConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("integrator: dt must be > 0");
    if (!(max_time >= dt)) throw ConfigError("integrator: max_time must be >= dt");
    if (noise_gamma < 0.0) throw ConfigError("integrator: noise_gamma must be >= 0");
    if (record_every < 1) throw ConfigError("integrator: record_every must be >= 1");
    if (!(convergence.window > 0.0)) throw ConfigError("integrator: convergence window must be > 0");
    if (!(convergence.threshold > 0.0)) throw ConfigError("integrator: convergence threshold must be > 0");
}

std::vector<double> step(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                         const std::vector<double>& mu_vec, const IntegratorConfig& cfg, Rng& noise,
                         double t) {
    if (psi.size() != mu_vec.size() || static_cast<int>(psi.size()) != p.n) {
        throw ContractViolation("step: dimension mismatch");
    }
    EvalWorkspace ws;
    std::vector<double> grad_k, grad_r, drift;
    eval_model(m, p, psi, nullptr, nullptr, &grad_k, &grad_r, ws);
    compute_drift(m, grad_k, grad_r, mu_vec, t, drift);

    std::vector<double> next(psi.size());
    const double noise_scale =
        cfg.noise_kind == NoiseKind::Wiener ? cfg.noise_gamma * std::sqrt(cfg.dt) : cfg.noise_gamma;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        next[i] = psi[i] + cfg.dt * drift[i];
        if (cfg.noise_gamma > 0.0) next[i] += noise_scale * noise.normal();
    }
    if (m.family == Family::Oim) wrap_oim_phases(next);
    return next;
}

namespace {

bool converged_ratio(double window_min, double window_max, double e_init, double e_now,
                     double threshold) {
    if (!(e_init > e_now)) return false;
    return (window_max - window_min) / (e_init - e_now) <= threshold;
}

}  // namespace

bool detect_convergence(const std::vector<double>& window_energies, double e_init, double e_now,
                        double threshold) {
    if (window_energies.empty()) return false;
    const auto [mn, mx] = std::minmax_element(window_energies.begin(), window_energies.end());
    return converged_ratio(*mn, *mx, e_init, e_now, threshold);
}

std::vector<double> sample_initial(const AimModel& m, int n, std::uint64_t seed) {
    if (n < 1) throw ContractViolation("sample_initial: n must be >= 1");
    Rng rng(mix_seed(seed, 0x1a171));
    std::vector<double> psi(n);
    double lo = 0.0;
    double hi = kTwoPi;
    switch (m.family) {
        case Family::Oim: break;
        case Family::Brim: lo = -10.0; hi = 10.0; break;
        case Family::Rosc:
        case Family::Go: lo = -1.0; hi = 1.0; break;
    }
    for (int i = 0; i < n; ++i) psi[i] = rng.uniform(lo, hi);
    return psi;
}

RunResult integrate_run(const AimModel& m, const IsingProblem& p, std::vector<double> psi,
                        const IntegratorConfig& cfg, const MuProvider& mu_at) {
    cfg.validate();
    m.validate();
    if (static_cast<int>(psi.size()) != p.n) throw ContractViolation("integrate_run: state dimension mismatch");

    Rng noise(mix_seed(cfg.seed, 0x90153));
    EvalWorkspace ws;
    std::vector<double> grad_k, grad_r, drift;

    RunResult out;
    out.best_h = std::numeric_limits<double>::infinity();

    const long total_steps = std::lround(cfg.max_time / cfg.dt);
    const double noise_scale =
        cfg.noise_kind == NoiseKind::Wiener ? cfg.noise_gamma * std::sqrt(cfg.dt) : cfg.noise_gamma;

    std::deque<std::pair<double, double>> window;  // (t, E) within the sliding window
    double e_init = 0.0;
    double last_recorded_t = -1.0;

    auto record = [&](double t, double e, double k, double r) {
        const SpinConfig s = decide(m, psi);
        const double h = hamiltonian(p, s);
        out.trajectory.samples.push_back({t, e, k, r, h});
        if (cfg.record_states) out.trajectory.psi_snapshots.push_back(psi);
        if (h < out.best_h) {
            out.best_h = h;
            out.best_config = s;
        }
        last_recorded_t = t;
    };

    long step_index = 0;
    double t = 0.0;
    for (;; ++step_index) {
        t = static_cast<double>(step_index) * cfg.dt;
        const std::vector<double>& mu_vec = mu_at(step_index, t, psi);
        if (mu_vec.size() != psi.size()) throw ContractViolation("integrate_run: mu dimension mismatch");

        double k = 0.0;
        eval_model(m, p, psi, &k, nullptr, &grad_k, &grad_r, ws);
        // E = K + sum_i mu_i * r_i with the currently held mu
        double r_total = 0.0;
        double e = k;
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double term = binar_term(m, psi[i]);
            r_total += term;
            e += mu_vec[i] * term;
        }
        if (step_index == 0) e_init = e;

        window.emplace_back(t, e);
        while (!window.empty() && window.front().first < t - cfg.convergence.window) window.pop_front();

        if (step_index % cfg.record_every == 0) record(t, e, k, r_total);

        if (cfg.convergence.enabled && !out.converged && t >= cfg.convergence.window) {
            double mn = window.front().second;
            double mx = mn;
            for (const auto& [wt, we] : window) {
                mn = std::min(mn, we);
                mx = std::max(mx, we);
            }
            if (converged_ratio(mn, mx, e_init, e, cfg.convergence.threshold)) {
                out.trajectory.converged_at = t;
                out.converged = true;
                if (cfg.convergence.stop_run) {
                    if (last_recorded_t < t) record(t, e, k, r_total);
                    break;
                }
            }
        }

        if (step_index >= total_steps) {
            if (last_recorded_t < t) record(t, e, k, r_total);
            break;
        }

        compute_drift(m, grad_k, grad_r, mu_vec, t, drift);
        for (std::size_t i = 0; i < psi.size(); ++i) {
            const double before = psi[i];
            psi[i] += cfg.dt * drift[i];
            if (cfg.noise_gamma > 0.0) psi[i] += noise_scale * noise.normal();
            // K_GO jumps at 0; crossings are logged so runs passing through
            // the discontinuity are identifiable
            if (m.family == Family::Go && before != 0.0 && psi[i] != 0.0 &&
                std::signbit(before) != std::signbit(psi[i])) {
                ++out.go_zero_crossings;
            }
        }
        if (m.family == Family::Oim) wrap_oim_phases(psi);
    }

    out.final_psi = std::move(psi);
    out.t_end = t;
    return out;
}

RunResult run_autonomous(const AimModel& m, const IsingProblem& p, std::vector<double> psi0, double mu,
                         const IntegratorConfig& cfg) {
    const std::vector<double> mu_vec(psi0.size(), mu);
    return integrate_run(m, p, std::move(psi0), cfg,
                         [&mu_vec](long, double, const std::vector<double>&) -> const std::vector<double>& {
                             return mu_vec;
                         });
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_trajectory_csv: cannot open " + path);
    out << "t,E,K,R,H_decision\n";
    char buf[160];
    for (const auto& s : traj.samples) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%.12g\n", s.t, s.e, s.k, s.r, s.h_decision);
        out << buf;
    }
}

void write_state_snapshots_jsonl(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_state_snapshots_jsonl: cannot open " + path);
    char buf[64];
    for (std::size_t i = 0; i < traj.psi_snapshots.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", traj.samples[i].t);
        out << "{\"t\":" << buf << ",\"psi\":[";
        const auto& psi = traj.psi_snapshots[i];
        for (std::size_t k = 0; k < psi.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", psi[k]);
            out << (k ? "," : "") << buf;
        }
        out << "]}\n";
    }
}

}  // namespace caim
