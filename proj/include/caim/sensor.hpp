#pragma once

#include <optional>
#include <string>
#include <vector>

namespace caim {

// Signal-level emulation of the phase-sensing chain: oscillator waveforms are
// synthesized from the phase trajectory, peaks/valleys are detected with a
// three-register comparator, and characteristic phases are recovered by
// linear extrapolation against reference oscillator 0.

struct WaveformConfig {
    int oversample = 20;               // voltage samples per oscillation period
    double period = 1.0;               // T, phase-time units
    double amplitude = 1.0;
    std::optional<int> quant_bits;     // ADC quantization over [-A, A]

    void validate() const;
    double sample_dt() const { return period / oversample; }
};

struct PhaseTrajectory {
    std::vector<double> times;               // strictly increasing
    std::vector<std::vector<double>> psi;    // one state vector per time
};

struct WaveformSet {
    double sample_dt = 0.0;
    std::vector<double> times;
    std::vector<std::vector<double>> voltages;  // [oscillator][sample]
};

enum class ExtremumKind { Peak, Valley };

struct Extremum {
    double t = 0.0;
    ExtremumKind kind = ExtremumKind::Peak;
};

using ExtremaTrack = std::vector<Extremum>;

// v_i(t_s) = A cos(2 pi t_s / T + phi_i(t_s)) on the uniform sample grid;
// phases are interpolated linearly between trajectory points. Refuses
// trajectories sparser than one sample interval.
WaveformSet synth_waveform(const PhaseTrajectory& traj, const WaveformConfig& cfg);

// Streaming middle-of-three comparator with the 0.4 T noise filter. Accepted
// extrema are timestamped at the middle sample, so detection lags the true
// event by up to one sampling interval.
class ExtremaDetector {
public:
    explicit ExtremaDetector(const WaveformConfig& cfg);

    void push(double t, double v);
    const ExtremaTrack& track() const { return track_; }

private:
    double min_gap_;
    double t_[3] = {0, 0, 0};
    double v_[3] = {0, 0, 0};
    int filled_ = 0;
    double last_accepted_ = 0.0;
    bool has_accepted_ = false;
    ExtremaTrack track_;
};

ExtremaTrack detect_extrema(const std::vector<double>& times, const std::vector<double>& voltages,
                            const WaveformConfig& cfg);

// Real-time phase estimate (mod 2pi) at time t: slope from the last completed
// extremum pair, anchored at the latest extremum (peak = 0, valley = pi).
// Unavailable before the second accepted extremum.
std::optional<double> estimate_phase(const ExtremaTrack& track, double t);

// Characteristic phase of oscillator i relative to reference oscillator 0,
// wrapped into [0, 2pi).
std::optional<double> relative_phase(const ExtremaTrack& reference, const ExtremaTrack& osc, double t);

// Debug CSV with t,v_0,...,v_{n-1} columns.
void write_waveforms_csv(const WaveformSet& w, const std::string& path);

}  // namespace caim
