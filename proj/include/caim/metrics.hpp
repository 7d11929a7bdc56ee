#pragma once

#include <optional>
#include <vector>

#include "caim/aim.hpp"
#include "caim/ising.hpp"

namespace caim {

// r's denominator norm: maximum absolute entry by default, induced
// max-row-sum selectable.
enum class JNormKind { MaxAbsEntry, MaxRowSum };

struct MetricsConfig {
    JNormKind j_norm = JNormKind::MaxAbsEntry;
    double success_constant = 1.35;  // calibrated to the SpinModel family
};

// Estimated approximation ratio r = 1/2 - H / (2 (sqrt(n) ||J|| + ||h||_1)).
// May exceed 1; undefined for the all-zero problem.
double approx_ratio(const IsingProblem& p, double h_value, const MetricsConfig& cfg = {});

// P-hat = exp(-sqrt(n) (c - r)), clamped to 1 when r exceeds c.
double success_estimate(int n, double r, double constant = 1.35);

// v = t_run * log(1 - 0.99) / log(1 - p_hat); p_hat >= 1 collapses to t_run,
// p_hat <= 0 yields +infinity.
double time_to_solution(double t_run, double p_hat);

struct RunMetrics {
    double best_h = 0.0;
    double r = 0.0;
    double p_hat = 0.0;
    double t_run = 0.0;
    double tts = 0.0;
    bool converged = false;
};

RunMetrics compute_run_metrics(const IsingProblem& p, double best_h, double t_run, bool converged,
                               const MetricsConfig& cfg = {});

struct EquivalenceReport {
    double mu = 0.0;
    double min_energy_ground = 0.0;   // min E over F^-1(S_0) on the grid
    double min_energy_excited = 0.0;  // min E over the complement
    bool equivalent = false;
};

struct GridBounds {
    double lo = 0.0;
    double hi = 0.0;
    bool periodic = false;  // exclude hi (one full period)
};

GridBounds default_grid_bounds(Family family);

// Dense grid search over the state space, n <= 4 enforced; the ground set
// comes from brute_force_ground. equivalent holds iff the grid minimum over
// ground-decoding states does not exceed the minimum over the rest.
EquivalenceReport equivalence_check_grid(const AimModel& m, const IsingProblem& p, double mu, int grid_res,
                                         std::optional<GridBounds> bounds = std::nullopt);

struct AggregateSummary {
    int instances = 0;
    int restarts = 0;
    long runs = 0;
    double mean_r = 0.0;
    double max_r = 0.0;
    std::optional<double> exact_success;  // fraction of runs with best_h == H0
    double p_hat_mean = 0.0;
    double t_run_mean = 0.0;
    double tts_median = 0.0;
};

AggregateSummary aggregate(const std::vector<RunMetrics>& results, std::optional<double> h0);

}  // namespace caim
