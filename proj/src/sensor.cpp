#include "caim/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "caim/errors.hpp"

namespace caim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692528676656;

double wrap_2pi(double phase) {
    phase = std::fmod(phase, kTwoPi);
    if (phase < 0.0) phase += kTwoPi;
    return phase;
}

double quantize(double v, double amplitude, int bits) {
    const double levels = static_cast<double>((1 << bits) - 1);
    double q = std::round((v + amplitude) / (2.0 * amplitude) * levels);
    q = std::clamp(q, 0.0, levels);
    return -amplitude + q * 2.0 * amplitude / levels;
}

}  // namespace

void WaveformConfig::validate() const {
    if (oversample < 3) throw ContractViolation("waveform: oversample must be >= 3 (three-register comparator)");
    if (!(period > 0.0)) throw ContractViolation("waveform: period must be > 0");
    if (!(amplitude > 0.0)) throw ContractViolation("waveform: amplitude must be > 0");
    if (quant_bits && (*quant_bits < 1 || *quant_bits > 24)) {
        throw ContractViolation("waveform: quant_bits must be in [1, 24]");
    }
}

WaveformSet synth_waveform(const PhaseTrajectory& traj, const WaveformConfig& cfg) {
    cfg.validate();
    if (traj.times.size() < 2 || traj.times.size() != traj.psi.size()) {
        throw ContractViolation("synth_waveform: trajectory needs >= 2 aligned samples");
    }
    const double ds = cfg.sample_dt();
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
        const double gap = traj.times[i] - traj.times[i - 1];
        if (!(gap > 0.0)) throw ContractViolation("synth_waveform: trajectory times must increase");
        if (gap > ds * (1.0 + 1e-9)) {
            throw ContractViolation("synth_waveform: trajectory spacing " + std::to_string(gap) +
                                    " exceeds the sample interval " + std::to_string(ds) +
                                    "; record more densely or lower oversample");
        }
    }

    const std::size_t n = traj.psi.front().size();
    const double t_end = traj.times.back();
    WaveformSet out;
    out.sample_dt = ds;

    std::size_t seg = 0;
    for (double t = traj.times.front(); t <= t_end + 1e-12; t += ds) {
        out.times.push_back(t);
    }
    out.voltages.assign(n, std::vector<double>(out.times.size()));

    for (std::size_t s = 0; s < out.times.size(); ++s) {
        const double t = out.times[s];
        while (seg + 2 < traj.times.size() && traj.times[seg + 1] < t) ++seg;
        const double t0 = traj.times[seg];
        const double t1 = traj.times[seg + 1];
        const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double phi = traj.psi[seg][i] + w * (traj.psi[seg + 1][i] - traj.psi[seg][i]);
            double v = cfg.amplitude * std::cos(kTwoPi * t / cfg.period + phi);
            if (cfg.quant_bits) v = quantize(v, cfg.amplitude, *cfg.quant_bits);
            out.voltages[i][s] = v;
        }
    }
    return out;
}

ExtremaDetector::ExtremaDetector(const WaveformConfig& cfg) : min_gap_(0.4 * cfg.period) {
    cfg.validate();
}

void ExtremaDetector::push(double t, double v) {
    if (filled_ < 3) {
        t_[filled_] = t;
        v_[filled_] = v;
        ++filled_;
    } else {
        t_[0] = t_[1];
        v_[0] = v_[1];
        t_[1] = t_[2];
        v_[1] = v_[2];
        t_[2] = t;
        v_[2] = v;
    }
    if (filled_ < 3) return;

    // middle-of-three comparison. The left neighbour must differ strictly so
    // a quantization plateau yields exactly one extremum (its first sample);
    // a fully strict rule would drop peaks that two equal ADC samples
    // straddle, and with sampling locked to 20x the oscillator frequency that
    // alignment repeats every period and the extremum is never seen.
    const bool peak = v_[1] > v_[0] && v_[1] >= v_[2];
    const bool valley = v_[1] < v_[0] && v_[1] <= v_[2];
    if (!peak && !valley) return;
    if (has_accepted_ && t_[1] - last_accepted_ <= min_gap_) return;
    track_.push_back({t_[1], peak ? ExtremumKind::Peak : ExtremumKind::Valley});
    last_accepted_ = t_[1];
    has_accepted_ = true;
}

ExtremaTrack detect_extrema(const std::vector<double>& times, const std::vector<double>& voltages,
                            const WaveformConfig& cfg) {
    if (times.size() != voltages.size()) throw ContractViolation("detect_extrema: time/voltage size mismatch");
    if (times.size() < 3) throw ContractViolation("detect_extrema: stream length must be >= 3");
    ExtremaDetector det(cfg);
    for (std::size_t i = 0; i < times.size(); ++i) det.push(times[i], voltages[i]);
    return det.track();
}

std::optional<double> estimate_phase(const ExtremaTrack& track, double t) {
    // latest extremum at or before t, plus its predecessor for the slope
    const auto it = std::upper_bound(track.begin(), track.end(), t,
                                     [](double val, const Extremum& e) { return val < e.t; });
    const std::size_t count = static_cast<std::size_t>(it - track.begin());
    if (count < 2) return std::nullopt;
    const Extremum& anchor = track[count - 1];
    const Extremum& prev = track[count - 2];

    // peak->valley spans pi, like-kind pairs span a full turn
    const double span = (anchor.kind == prev.kind) ? kTwoPi : kPi;
    const double rate = span / (anchor.t - prev.t);
    const double anchor_phase = anchor.kind == ExtremumKind::Peak ? 0.0 : kPi;
    return wrap_2pi(anchor_phase + rate * (t - anchor.t));
}

std::optional<double> relative_phase(const ExtremaTrack& reference, const ExtremaTrack& osc, double t) {
    const auto ref = estimate_phase(reference, t);
    const auto own = estimate_phase(osc, t);
    if (!ref || !own) return std::nullopt;
    return wrap_2pi(*own - *ref);
}

void write_waveforms_csv(const WaveformSet& w, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_waveforms_csv: cannot open " + path);
    out << "t";
    for (std::size_t i = 0; i < w.voltages.size(); ++i) out << ",v_" << i;
    out << "\n";
    char buf[48];
    for (std::size_t s = 0; s < w.times.size(); ++s) {
        std::snprintf(buf, sizeof(buf), "%.12g", w.times[s]);
        out << buf;
        for (std::size_t i = 0; i < w.voltages.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.12g", w.voltages[i][s]);
            out << ',' << buf;
        }
        out << "\n";
    }
}

}  // namespace caim
