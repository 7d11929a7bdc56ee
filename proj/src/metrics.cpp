#include "caim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "caim/errors.hpp"

namespace caim {

namespace {

constexpr double kExactHitTol = 1e-9;  // SpinModel Hamiltonians sit on a 0.1 grid

}  // namespace

double approx_ratio(const IsingProblem& p, double h_value, const MetricsConfig& cfg) {
    const double j_norm =
        cfg.j_norm == JNormKind::MaxAbsEntry ? p.max_abs_coupling() : p.max_abs_row_sum();
    const double denom = 2.0 * (std::sqrt(static_cast<double>(p.n)) * j_norm + p.bias_l1());
    if (!(denom > 0.0)) throw ContractViolation("approx_ratio: undefined for the all-zero problem");
    return 0.5 - h_value / denom;
}

double success_estimate(int n, double r, double constant) {
    if (n < 1) throw ContractViolation("success_estimate: n must be >= 1");
    const double p = std::exp(-std::sqrt(static_cast<double>(n)) * (constant - r));
    return std::min(p, 1.0);
}

// volatile keeps the compiler from constant-folding the numerator through a
// differently-rounded path than the runtime log1p, so v(t, 0.99) == t exactly
static const volatile double kConfidence = 0.99;

double time_to_solution(double t_run, double p_hat) {
    if (t_run < 0.0) throw ContractViolation("time_to_solution: t_run must be >= 0");
    if (p_hat >= 1.0) return t_run;
    if (p_hat <= 0.0) return std::numeric_limits<double>::infinity();
    return t_run * std::log1p(-kConfidence) / std::log1p(-p_hat);
}

RunMetrics compute_run_metrics(const IsingProblem& p, double best_h, double t_run, bool converged,
                               const MetricsConfig& cfg) {
    RunMetrics out;
    out.best_h = best_h;
    out.r = approx_ratio(p, best_h, cfg);
    out.p_hat = success_estimate(p.n, out.r, cfg.success_constant);
    out.t_run = t_run;
    out.tts = time_to_solution(t_run, out.p_hat);
    out.converged = converged;
    return out;
}

GridBounds default_grid_bounds(Family family) {
    if (family == Family::Oim) return {0.0, 6.28318530717958647692528676656, true};
    return {-3.0, 3.0, false};
}

EquivalenceReport equivalence_check_grid(const AimModel& m, const IsingProblem& p, double mu, int grid_res,
                                         std::optional<GridBounds> bounds) {
    if (p.n > 4) {
        throw ResourceCapError("equivalence_check_grid: n = " + std::to_string(p.n) +
                               " exceeds the grid cap of 4");
    }
    if (grid_res < 11) throw ContractViolation("equivalence_check_grid: grid_res must be >= 11");
    const GridBounds gb = bounds ? *bounds : default_grid_bounds(m.family);
    if (!(gb.hi > gb.lo)) throw ContractViolation("equivalence_check_grid: bounds must satisfy lo < hi");

    const auto ground = brute_force_ground(p);
    const double h0 = ground.h0;

    const int n = p.n;
    const double span = gb.hi - gb.lo;
    const double step = gb.periodic ? span / grid_res : span / (grid_res - 1);

    std::vector<int> idx(n, 0);
    std::vector<double> psi(n, gb.lo);
    EvalWorkspace ws;

    double min_ground = std::numeric_limits<double>::infinity();
    double min_excited = std::numeric_limits<double>::infinity();

    for (;;) {
        for (int i = 0; i < n; ++i) psi[i] = gb.lo + step * idx[i];
        double k = 0.0;
        double r = 0.0;
        eval_model(m, p, psi, &k, &r, nullptr, nullptr, ws);
        const double e = k + mu * r;
        const double h = hamiltonian(p, decide(m, psi));
        if (std::abs(h - h0) <= kExactHitTol) {
            min_ground = std::min(min_ground, e);
        } else {
            min_excited = std::min(min_excited, e);
        }

        int carry = 0;
        while (carry < n) {
            if (++idx[carry] < grid_res) break;
            idx[carry] = 0;
            ++carry;
        }
        if (carry == n) break;
    }

    EquivalenceReport out;
    out.mu = mu;
    out.min_energy_ground = min_ground;
    out.min_energy_excited = min_excited;
    out.equivalent = min_ground <= min_excited;
    return out;
}

AggregateSummary aggregate(const std::vector<RunMetrics>& results, std::optional<double> h0) {
    if (results.empty()) throw ContractViolation("aggregate: empty result list");
    AggregateSummary out;
    out.runs = static_cast<long>(results.size());
    double sum_r = 0.0;
    double sum_p = 0.0;
    double sum_t = 0.0;
    long hits = 0;
    out.max_r = -std::numeric_limits<double>::infinity();
    std::vector<double> tts_values;
    tts_values.reserve(results.size());
    for (const auto& rm : results) {
        sum_r += rm.r;
        sum_p += rm.p_hat;
        sum_t += rm.t_run;
        out.max_r = std::max(out.max_r, rm.r);
        tts_values.push_back(rm.tts);
        if (h0 && std::abs(rm.best_h - *h0) <= kExactHitTol) ++hits;
    }
    const double count = static_cast<double>(results.size());
    out.mean_r = sum_r / count;
    out.p_hat_mean = sum_p / count;
    out.t_run_mean = sum_t / count;
    if (h0) out.exact_success = static_cast<double>(hits) / count;

    std::sort(tts_values.begin(), tts_values.end());
    const std::size_t mid = tts_values.size() / 2;
    out.tts_median = tts_values.size() % 2 == 1 ? tts_values[mid]
                                                : 0.5 * (tts_values[mid - 1] + tts_values[mid]);
    return out;
}

}  // namespace caim
