#include "caim/aim.hpp"

#include <cmath>

#include "caim/errors.hpp"

namespace caim {

namespace {

// sgn with sgn(0) = 0; the decide() tie-break is handled separately.
inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

inline void matvec(const IsingProblem& p, const std::vector<double>& v, std::vector<double>& out) {
    const int n = p.n;
    out.resize(n);
    const double* jm = p.j.data();
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = jm + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) acc += row[k] * v[k];
        out[i] = acc;
    }
}

}  // namespace

Family family_from_name(const std::string& name) {
    if (name == "oim") return Family::Oim;
    if (name == "brim") return Family::Brim;
    if (name == "rosc") return Family::Rosc;
    if (name == "go") return Family::Go;
    throw ContractViolation("unknown AIM family '" + name + "' (expected oim|brim|rosc|go)");
}

std::string family_name(Family family) {
    switch (family) {
        case Family::Oim: return "oim";
        case Family::Brim: return "brim";
        case Family::Rosc: return "rosc";
        case Family::Go: return "go";
    }
    return "?";
}

void AimModel::validate() const {
    if (!(brim_bound > 0.0)) throw ContractViolation("AimModel: brim_bound must be > 0");
    if (!(brim_scale > 0.0)) throw ContractViolation("AimModel: brim_scale must be > 0");
    if (!(rosc_slope > 0.0)) throw ContractViolation("AimModel: rosc_slope must be > 0");
    if (!(rosc_rho > 0.0)) throw ContractViolation("AimModel: rosc_rho must be > 0");
    if (!(go_epsilon > 0.0)) throw ContractViolation("AimModel: go_epsilon must be > 0");
}

void eval_model(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                double* k_out, double* r_out, std::vector<double>* grad_k, std::vector<double>* grad_r,
                EvalWorkspace& ws) {
    const int n = p.n;
    if (static_cast<int>(psi.size()) != n) throw ContractViolation("eval_model: state dimension mismatch");

    if (m.family == Family::Oim) {
        // K = c'Jc + s'Js + h'c with c = cos(psi), s = sin(psi);
        // dK/dphi_i = -s_i (2(Jc)_i + h_i) + 2 c_i (Js)_i equals the pairwise
        // form -2 sum_j J_ij sin(phi_i - phi_j) - h_i sin(phi_i).
        auto& c = ws.sigma;
        auto& s = ws.sigma2;
        c.resize(n);
        s.resize(n);
        for (int i = 0; i < n; ++i) {
            c[i] = std::cos(psi[i]);
            s[i] = std::sin(psi[i]);
        }
        matvec(p, c, ws.matvec);
        if (k_out || grad_k) matvec(p, s, ws.matvec2);
        if (k_out) {
            double k = 0.0;
            for (int i = 0; i < n; ++i) k += c[i] * ws.matvec[i] + s[i] * ws.matvec2[i] + p.h[i] * c[i];
            *k_out = k;
        }
        if (grad_k) {
            grad_k->resize(n);
            for (int i = 0; i < n; ++i) {
                (*grad_k)[i] = -s[i] * (2.0 * ws.matvec[i] + p.h[i]) + 2.0 * c[i] * ws.matvec2[i];
            }
        }
        if (r_out) {
            double r = 0.0;
            for (int i = 0; i < n; ++i) r += binar_term(m, psi[i]);
            *r_out = r;
        }
        if (grad_r) {
            grad_r->resize(n);
            for (int i = 0; i < n; ++i) (*grad_r)[i] = 2.0 * std::sin(2.0 * psi[i]);
        }
        return;
    }

    // BRIM / ROSC / GO follow the shared pattern K = u'Ju + h'u with a
    // per-oscillator map u = sigma(phi): dK/dphi_i = sigma'(phi_i)(2(Ju)_i + h_i).
    auto& u = ws.sigma;
    auto& du = ws.sigma2;
    u.resize(n);
    du.resize(n);
    switch (m.family) {
        case Family::Brim:
            for (int i = 0; i < n; ++i) {
                u[i] = psi[i];
                du[i] = 1.0;
            }
            break;
        case Family::Rosc:
            for (int i = 0; i < n; ++i) {
                const double th = std::tanh(m.rosc_slope * psi[i]);
                u[i] = th;
                du[i] = m.rosc_slope * (1.0 - th * th);
            }
            break;
        case Family::Go:
            for (int i = 0; i < n; ++i) {
                const double g = sgn(psi[i]) * std::exp(-0.5 * psi[i] * psi[i]);
                u[i] = g;
                du[i] = -psi[i] * g;  // zero at the jump, by convention
            }
            break;
        case Family::Oim:
            break;
    }

    if (k_out || grad_k) matvec(p, u, ws.matvec);
    if (k_out) {
        double k = 0.0;
        for (int i = 0; i < n; ++i) k += u[i] * ws.matvec[i] + p.h[i] * u[i];
        *k_out = k;
    }
    if (grad_k) {
        grad_k->resize(n);
        for (int i = 0; i < n; ++i) (*grad_k)[i] = du[i] * (2.0 * ws.matvec[i] + p.h[i]);
    }

    if (r_out) {
        double r = 0.0;
        for (int i = 0; i < n; ++i) r += binar_term(m, psi[i]);
        *r_out = r;
    }
    if (grad_r) {
        grad_r->resize(n);
        switch (m.family) {
            case Family::Brim:
                for (int i = 0; i < n; ++i) (*grad_r)[i] = 4.0 * psi[i] * (psi[i] * psi[i] - 1.0);
                break;
            case Family::Rosc:
                // symmetric subgradient: 0 at the kink
                for (int i = 0; i < n; ++i) (*grad_r)[i] = -sgn(psi[i]);
                break;
            case Family::Go:
                for (int i = 0; i < n; ++i) (*grad_r)[i] = 2.0 * psi[i];
                break;
            case Family::Oim:
                break;
        }
    }
}

double repr_energy(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi) {
    EvalWorkspace ws;
    double k = 0.0;
    eval_model(m, p, psi, &k, nullptr, nullptr, nullptr, ws);
    return k;
}

double binar_energy(const AimModel& m, const std::vector<double>& psi) {
    double r = 0.0;
    for (double phi : psi) r += binar_term(m, phi);
    return r;
}

std::vector<double> binar_terms(const AimModel& m, const std::vector<double>& psi) {
    std::vector<double> terms(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) terms[i] = binar_term(m, psi[i]);
    return terms;
}

void grad(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
          std::vector<double>& grad_k, std::vector<double>& grad_r) {
    EvalWorkspace ws;
    eval_model(m, p, psi, nullptr, nullptr, &grad_k, &grad_r, ws);
}

SpinConfig decide(const AimModel& m, const std::vector<double>& psi) {
    SpinConfig s(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double arg = (m.family == Family::Oim) ? std::cos(psi[i]) : psi[i];
        s[i] = arg >= 0.0 ? 1 : -1;  // ties resolve to +1
    }
    return s;
}

std::vector<double> extremum_state(const AimModel& m, const SpinConfig& s) {
    std::vector<double> psi(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        switch (m.family) {
            case Family::Oim: psi[i] = s[i] > 0 ? 0.0 : 3.14159265358979323846; break;
            case Family::Brim: psi[i] = static_cast<double>(s[i]); break;
            case Family::Rosc: psi[i] = s[i] * m.rosc_rho; break;
            case Family::Go: psi[i] = s[i] * m.go_epsilon; break;
        }
    }
    return psi;
}

EnergyBreakdown energy_breakdown(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                                 const std::vector<double>& mu_vec) {
    if (mu_vec.size() != psi.size()) throw ContractViolation("energy_breakdown: mu dimension mismatch");
    EnergyBreakdown out;
    out.k = repr_energy(m, p, psi);
    const auto terms = binar_terms(m, psi);
    out.r = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        out.r += terms[i];
        weighted += mu_vec[i] * terms[i];
    }
    out.e = out.k + weighted;
    out.mu_used = mu_vec;
    return out;
}

}  // namespace caim
