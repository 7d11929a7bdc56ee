#pragma once

#include <optional>
#include <vector>

#include "caim/aim.hpp"
#include "caim/dynamics.hpp"
#include "caim/sensor.hpp"

namespace caim {

enum class NormMode { L2, L1 };

// Sampled-feedback control loop parameters. E' = K + mu_prime * R is the
// fixed reference energy used inside the injection law and the CLF.
struct ControllerConfig {
    double beta = 0.9;            // momentum decay
    double eta = 1.0;             // learning rate
    double tau = 0.1;             // slice period, phase time
    double mu_prime = 1.0;        // reference injection strength
    double clip_bound = 0.0;      // <= 0 means the default 4 * mu_prime
    NormMode norm_mode = NormMode::L2;
    double grad_floor = 1e-6;     // momentum guard: 1/dR undefined at R-extrema
    double reference_node_mu = 0.0;  // <= 0 means the default 4 * mu_prime
    std::optional<int> reference_node;  // bias node on augmented problems
    bool literal_scalar_norm = false;   // debug: |E'| * dR in the denominator
    std::optional<WaveformConfig> sensor;  // sample states through the sensing chain

    void validate() const;
    double effective_clip() const { return clip_bound > 0.0 ? clip_bound : 4.0 * mu_prime; }
    double effective_reference_mu() const {
        return reference_node_mu > 0.0 ? reference_node_mu : 4.0 * mu_prime;
    }
};

// Boundary samples feeding the injection law: psi at slices k-1 and k-2,
// plus the mu vector currently held (zero-order hold).
struct SliceBuffer {
    std::vector<double> psi_km1;
    std::vector<double> psi_km2;
    long k = 0;
    std::vector<double> held_mu;
};

// Adaptive injection law:
//   mu^(k) = -beta * (psi^(k-1) - psi^(k-2)) / dR(psi^(k-1))
//          + eta * (sqrt(n) / ||dE'(psi^(k-1)) . dR(psi^(k-1))||_2)
//                * dE'(psi^(k-1)) . dR(psi^(k-1))
// with element-wise products, dE' = dK + mu_prime dR. L1 mode replaces
// sqrt(n)/||.||_2 by n/||.||_1. Elements with |dR_i| < grad_floor drop their
// momentum term; a zero gradient term yields a zero vector; if both terms
// vanish the held mu is returned unchanged. The result is clipped to
// [-clip, +clip] element-wise.
std::vector<double> adaptive_mu(const AimModel& m, const IsingProblem& p, const SliceBuffer& buf,
                                const ControllerConfig& cfg);

struct ClfDirection {
    std::vector<double> mu_parallel;  // unit steepest-descent control direction
    double alpha_star = 0.0;          // dE'(psi)^T dK(psi), the half-space offset
    bool degenerate = false;          // direction vanished (R-extremum)
};

ClfDirection clf_direction(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                           double mu_prime);

struct MuSlice {
    long k = 0;
    double t_start = 0.0;
    std::vector<double> mu;
};

using MuTrace = std::vector<MuSlice>;

struct ControlledRunResult {
    RunResult run;
    MuTrace mu_trace;
    long stalled_slices = 0;  // slices held because sensor estimates were unavailable
};

// Zero-order-hold control: slices 0 and 1 hold mu_prime * 1; from slice 2 on,
// mu^(k) is computed from the boundary samples at (k-1) tau and (k-2) tau.
// The reference node, when set, always receives its fixed strength.
ControlledRunResult run_controlled(const AimModel& m, const IsingProblem& p, std::vector<double> psi0,
                                   const ControllerConfig& ctrl, const IntegratorConfig& cfg);

// theta^(t+1) = theta^(t) + beta (theta^(t-1) - theta^(t-2)) - eta grad(theta^(t-1)).
// Standalone one-step-delay momentum recurrence for property checks.
std::vector<double> async_momentum_step(const std::vector<double>& theta_t,
                                        const std::vector<double>& theta_tm1,
                                        const std::vector<double>& theta_tm2,
                                        const std::vector<double>& grad_at_tm1, double beta, double eta);

// mu trace CSV: header k,t_start,mu_0,...,mu_{n-1}.
void write_mu_trace_csv(const MuTrace& trace, const std::string& path);

}  // namespace caim
