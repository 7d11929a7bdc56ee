#include "caim/controller.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "caim/errors.hpp"

namespace caim {

void ControllerConfig::validate() const {
    if (beta < 0.0 || beta >= 1.0) throw ConfigError("controller: beta must lie in [0, 1)");
    if (eta < 0.0) throw ConfigError("controller: eta must be >= 0");
    if (!(tau > 0.0)) throw ConfigError("controller: tau must be > 0");
    if (!(mu_prime > 0.0)) throw ConfigError("controller: mu_prime must be > 0");
    if (!(effective_clip() > 0.0)) throw ConfigError("controller: clip bound must be > 0");
    if (!(grad_floor > 0.0)) throw ConfigError("controller: grad_floor must be > 0");
    if (sensor) sensor->validate();
}

std::vector<double> adaptive_mu(const AimModel& m, const IsingProblem& p, const SliceBuffer& buf,
                                const ControllerConfig& cfg) {
    const std::size_t n = buf.psi_km1.size();
    if (buf.psi_km2.size() != n || buf.held_mu.size() != n || static_cast<int>(n) != p.n) {
        throw ContractViolation("adaptive_mu: buffer dimension mismatch");
    }

    std::vector<double> grad_k, grad_r;
    grad(m, p, buf.psi_km1, grad_k, grad_r);

    // gradient term: dE'(psi) . dR(psi), normalized
    std::vector<double> gterm(n);
    double norm_l2sq = 0.0;
    double norm_l1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ge = grad_k[i] + cfg.mu_prime * grad_r[i];
        gterm[i] = ge * grad_r[i];
        norm_l2sq += gterm[i] * gterm[i];
        norm_l1 += std::abs(gterm[i]);
    }
    double factor = 0.0;
    if (cfg.literal_scalar_norm) {
        // debug reading of the denominator: |E'(psi)| * ||dR(psi)||
        const double e_prime =
            repr_energy(m, p, buf.psi_km1) + cfg.mu_prime * binar_energy(m, buf.psi_km1);
        double gr_l2sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) gr_l2sq += grad_r[i] * grad_r[i];
        const double denom = std::abs(e_prime) * std::sqrt(gr_l2sq);
        factor = denom > 0.0 ? std::sqrt(static_cast<double>(n)) / denom : 0.0;
    } else if (cfg.norm_mode == NormMode::L2) {
        factor = norm_l2sq > 0.0 ? std::sqrt(static_cast<double>(n)) / std::sqrt(norm_l2sq) : 0.0;
    } else {
        factor = norm_l1 > 0.0 ? static_cast<double>(n) / norm_l1 : 0.0;
    }

    bool momentum_nonzero = false;
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        double momentum = 0.0;
        if (std::abs(grad_r[i]) >= cfg.grad_floor) {
            momentum = -cfg.beta * (buf.psi_km1[i] - buf.psi_km2[i]) / grad_r[i];
        }
        if (momentum != 0.0) momentum_nonzero = true;
        mu[i] = momentum + cfg.eta * factor * gterm[i];
    }

    // stagnation guard: no gradient direction exists and the momentum term
    // vanished too, so the formula carries no information at this state
    if (!(norm_l2sq > 0.0) && !momentum_nonzero) return buf.held_mu;

    const double clip = cfg.effective_clip();
    for (double& v : mu) v = std::clamp(v, -clip, clip);
    return mu;
}

ClfDirection clf_direction(const AimModel& m, const IsingProblem& p, const std::vector<double>& psi,
                           double mu_prime) {
    std::vector<double> grad_k, grad_r;
    grad(m, p, psi, grad_k, grad_r);

    ClfDirection out;
    out.mu_parallel.resize(psi.size());
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double ge = grad_k[i] + mu_prime * grad_r[i];
        out.mu_parallel[i] = grad_r[i] * ge;
        out.alpha_star += ge * grad_k[i];
        norm_sq += out.mu_parallel[i] * out.mu_parallel[i];
    }
    if (!(norm_sq > 0.0)) {
        out.degenerate = true;
        std::fill(out.mu_parallel.begin(), out.mu_parallel.end(), 0.0);
        return out;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (double& v : out.mu_parallel) v *= inv;
    return out;
}

namespace {

// Stateful mu provider implementing the time-sliced sampling-feedback chain.
class SliceController {
public:
    SliceController(const AimModel& m, const IsingProblem& p, const ControllerConfig& ctrl,
                    const IntegratorConfig& cfg, int n)
        : model_(m), problem_(p), ctrl_(ctrl), n_(n), held_mu_(n, ctrl.mu_prime) {
        steps_per_slice_ = std::lround(ctrl.tau / cfg.dt);
        if (ctrl.tau < cfg.dt) throw ConfigError("controller: tau must be >= integrator dt");
        if (steps_per_slice_ < 1) steps_per_slice_ = 1;
        apply_reference_override();
        if (ctrl_.sensor) {
            sensor_dt_ = ctrl_.sensor->sample_dt();
            if (sensor_dt_ + 1e-12 < cfg.dt) {
                throw ConfigError("controller: sensor sample interval is shorter than dt; lower dt or oversample");
            }
            detectors_.assign(n_, ExtremaDetector(*ctrl_.sensor));
        }
    }

    const std::vector<double>& mu_at(long step_index, double t, const std::vector<double>& psi) {
        if (ctrl_.sensor) feed_sensor(t, psi);
        if (step_index % steps_per_slice_ == 0) begin_slice(step_index / steps_per_slice_, t, psi);
        return held_mu_;
    }

    MuTrace take_trace() { return std::move(trace_); }
    long stalled_slices() const { return stalled_; }

private:
    void apply_reference_override() {
        if (ctrl_.reference_node && *ctrl_.reference_node >= 0 && *ctrl_.reference_node < n_) {
            held_mu_[*ctrl_.reference_node] = ctrl_.effective_reference_mu();
        }
    }

    void feed_sensor(double t, const std::vector<double>& psi) {
        // one waveform sample per sensor tick; the phase is held across the
        // step, which the dt <= sample_dt precondition keeps accurate
        while (next_sample_t_ <= t + 1e-12) {
            const double ts = next_sample_t_;
            for (int i = 0; i < n_; ++i) {
                double v = ctrl_.sensor->amplitude *
                           std::cos(6.28318530717958647692528676656 * ts / ctrl_.sensor->period + psi[i]);
                if (ctrl_.sensor->quant_bits) {
                    const double a = ctrl_.sensor->amplitude;
                    const double levels = static_cast<double>((1 << *ctrl_.sensor->quant_bits) - 1);
                    double q = std::round((v + a) / (2.0 * a) * levels);
                    q = std::clamp(q, 0.0, levels);
                    v = -a + q * 2.0 * a / levels;
                }
                detectors_[i].push(ts, v);
            }
            next_sample_t_ += sensor_dt_;
        }
    }

    // Boundary sample: exact state, or sensed characteristic phases.
    std::optional<std::vector<double>> boundary_sample(double t, const std::vector<double>& psi) const {
        if (!ctrl_.sensor) return psi;
        std::vector<double> est(n_);
        const ExtremaTrack& ref = detectors_[0].track();
        for (int i = 0; i < n_; ++i) {
            const auto phase = relative_phase(ref, detectors_[i].track(), t);
            if (!phase) return std::nullopt;
            est[i] = *phase;
        }
        return est;
    }

    void begin_slice(long slice, double t, const std::vector<double>& psi) {
        if (slice >= 2 && sample_km1_ && sample_km2_) {
            SliceBuffer buf;
            buf.psi_km1 = *sample_km1_;
            buf.psi_km2 = *sample_km2_;
            buf.k = slice;
            buf.held_mu = held_mu_;
            held_mu_ = adaptive_mu(model_, problem_, buf, ctrl_);
            apply_reference_override();
        } else if (slice >= 2) {
            ++stalled_;  // sensor estimates not available yet; hold
        }

        // sample taken at this boundary becomes psi^(k-1) for the next slice
        auto sample = boundary_sample(t, psi);
        sample_km2_ = std::move(sample_km1_);
        sample_km1_ = std::move(sample);

        trace_.push_back({slice, t, held_mu_});
    }

    const AimModel& model_;
    const IsingProblem& problem_;
    ControllerConfig ctrl_;
    int n_;
    long steps_per_slice_ = 1;
    std::vector<double> held_mu_;
    std::optional<std::vector<double>> sample_km1_;
    std::optional<std::vector<double>> sample_km2_;
    MuTrace trace_;
    long stalled_ = 0;

    std::vector<ExtremaDetector> detectors_;
    double sensor_dt_ = 0.0;
    double next_sample_t_ = 0.0;
};

}  // namespace

ControlledRunResult run_controlled(const AimModel& m, const IsingProblem& p, std::vector<double> psi0,
                                   const ControllerConfig& ctrl, const IntegratorConfig& cfg) {
    ctrl.validate();
    cfg.validate();
    SliceController controller(m, p, ctrl, cfg, p.n);
    ControlledRunResult out;
    out.run = integrate_run(m, p, std::move(psi0), cfg,
                            [&controller](long step_index, double t, const std::vector<double>& psi)
                                -> const std::vector<double>& { return controller.mu_at(step_index, t, psi); });
    out.mu_trace = controller.take_trace();
    out.stalled_slices = controller.stalled_slices();
    return out;
}

std::vector<double> async_momentum_step(const std::vector<double>& theta_t,
                                        const std::vector<double>& theta_tm1,
                                        const std::vector<double>& theta_tm2,
                                        const std::vector<double>& grad_at_tm1, double beta, double eta) {
    const std::size_t n = theta_t.size();
    if (theta_tm1.size() != n || theta_tm2.size() != n || grad_at_tm1.size() != n) {
        throw ContractViolation("async_momentum_step: dimension mismatch");
    }
    if (beta < 0.0 || beta >= 1.0) throw ContractViolation("async_momentum_step: beta must lie in [0, 1)");
    if (!(eta > 0.0)) throw ContractViolation("async_momentum_step: eta must be > 0");
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
        next[i] = theta_t[i] + beta * (theta_tm1[i] - theta_tm2[i]) - eta * grad_at_tm1[i];
    }
    return next;
}

void write_mu_trace_csv(const MuTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_mu_trace_csv: cannot open " + path);
    const std::size_t n = trace.empty() ? 0 : trace.front().mu.size();
    out << "k,t_start";
    for (std::size_t i = 0; i < n; ++i) out << ",mu_" << i;
    out << "\n";
    char buf[48];
    for (const auto& slice : trace) {
        out << slice.k;
        std::snprintf(buf, sizeof(buf), "%.12g", slice.t_start);
        out << ',' << buf;
        for (double v : slice.mu) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            out << ',' << buf;
        }
        out << "\n";
    }
}

}  // namespace caim
