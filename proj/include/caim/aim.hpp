#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "caim/ising.hpp"

namespace caim {

// The four machine families share one interface: a representation energy K
// that mimics the Hamiltonian, a binarization energy R whose minima encode
// spins, their analytic gradients, a sign-like decision map F, and canonical
// binarized states.
enum class Family { Oim, Brim, Rosc, Go };

Family family_from_name(const std::string& name);  // "oim" | "brim" | "rosc" | "go"
std::string family_name(Family family);

struct AimModel {
    Family family = Family::Oim;
    double brim_bound = 10.0;  // drift saturation bound*tanh(scale*drift)
    double brim_scale = 0.1;
    double rosc_slope = 1.0;   // tanh steepness
    double rosc_rho = 10.0;    // finite stand-in for the R minimum at infinity
    double go_epsilon = 1e-3;  // representative amplitude next to the jump at 0

    void validate() const;
};

struct EnergyBreakdown {
    double k = 0.0;
    double r = 0.0;
    double e = 0.0;
    std::vector<double> mu_used;
};

// Reusable buffers for the per-step kernel; keeps the hot loop allocation-free.
struct EvalWorkspace {
    std::vector<double> sigma;   // per-oscillator map sigma(phi) (cos for OIM)
    std::vector<double> sigma2;  // sin(phi) for OIM
    std::vector<double> matvec;  // J * sigma
    std::vector<double> matvec2; // J * sin for OIM
};

// Computes K, total R, and both gradients in one pass. Null output pointers
// skip the corresponding work.
void eval_model(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                double* k_out, double* r_out, std::vector<double>* grad_k, std::vector<double>* grad_r,
                EvalWorkspace& ws);

double repr_energy(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi);

// One oscillator's contribution to R.
inline double binar_term(const AimModel& m, double phi) {
    switch (m.family) {
        case Family::Oim: return -std::cos(2.0 * phi);
        case Family::Brim: {
            const double w = phi * phi - 1.0;
            return w * w;
        }
        case Family::Rosc: return -std::abs(phi);
        case Family::Go: return phi * phi;
    }
    return 0.0;
}

double binar_energy(const AimModel& m, const std::vector<double>& psi);
// Per-oscillator R contributions, so E = K + sum_i mu_i * r_i is computable.
std::vector<double> binar_terms(const AimModel& m, const std::vector<double>& psi);

void grad(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
          std::vector<double>& grad_k, std::vector<double>& grad_r);

SpinConfig decide(const AimModel& m, const std::vector<double>& psi);
std::vector<double> extremum_state(const AimModel& m, const SpinConfig& s);

EnergyBreakdown energy_breakdown(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                                 const std::vector<double>& mu_vec);

}  // namespace caim
