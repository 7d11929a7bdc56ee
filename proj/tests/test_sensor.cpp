#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "caim/errors.hpp"
#include "caim/rng.hpp"
#include "caim/sensor.hpp"

using namespace caim;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// constant-phase trajectory long enough for several oscillation periods
PhaseTrajectory constant_phases(const std::vector<double>& phases, double t_end, double spacing) {
    PhaseTrajectory traj;
    for (double t = 0.0; t <= t_end + 1e-12; t += spacing) {
        traj.times.push_back(t);
        traj.psi.push_back(phases);
    }
    return traj;
}

double circular_distance(double a, double b) {
    double d = std::fmod(std::abs(a - b), kTwoPi);
    return std::min(d, kTwoPi - d);
}

}  // namespace

TEST_CASE("waveform synthesis of a pure cosine") {
    WaveformConfig cfg;
    const auto w = synth_waveform(constant_phases({0.0}, 5.0, cfg.sample_dt()), cfg);
    CHECK(w.voltages[0][0] == doctest::Approx(1.0));  // peak at t = 0
    // antiphase stream is the negation
    const auto w2 = synth_waveform(constant_phases({kPi}, 5.0, cfg.sample_dt()), cfg);
    for (std::size_t i = 0; i < w.times.size(); ++i) {
        CHECK(w2.voltages[0][i] == doctest::Approx(-w.voltages[0][i]).epsilon(1e-9));
    }
}

TEST_CASE("waveform synthesis refuses sparse trajectories") {
    WaveformConfig cfg;
    CHECK_THROWS_WITH_AS(synth_waveform(constant_phases({0.0}, 5.0, 3.0 * cfg.sample_dt()), cfg),
                         doctest::Contains("spacing"), ContractViolation);
}

TEST_CASE("quantized outputs sit on the ADC grid") {
    WaveformConfig cfg;
    cfg.quant_bits = 8;
    const auto w = synth_waveform(constant_phases({0.7}, 3.0, cfg.sample_dt()), cfg);
    const double levels = 255.0;
    for (double v : w.voltages[0]) {
        const double q = (v + cfg.amplitude) / (2.0 * cfg.amplitude) * levels;
        CHECK(std::abs(q - std::round(q)) < 1e-9);
    }
}

TEST_CASE("extrema detection on a clean cosine") {
    WaveformConfig cfg;
    const auto w = synth_waveform(constant_phases({0.0}, 10.0, cfg.sample_dt()), cfg);
    const auto track = detect_extrema(w.times, w.voltages[0], cfg);

    // one peak and one valley per period, alternating in kind
    REQUIRE(track.size() >= 18);
    for (std::size_t i = 1; i < track.size(); ++i) {
        CHECK(track[i].kind != track[i - 1].kind);
        CHECK(track[i].t - track[i - 1].t > 0.4 * cfg.period);
    }
    // detection lag stays within one sampling interval
    for (const auto& e : track) {
        const double true_t = e.kind == ExtremumKind::Peak ? std::round(e.t / cfg.period) * cfg.period
                                                           : (std::floor(e.t / cfg.period) + 0.5) * cfg.period;
        CHECK(std::abs(e.t - true_t) <= w.sample_dt + 1e-9);
    }
}

TEST_CASE("0.4T filter rejects glitches and keeps genuine extrema") {
    WaveformConfig cfg;
    auto w = synth_waveform(constant_phases({0.0}, 6.0, cfg.sample_dt()), cfg);
    // single-sample glitch shortly after the t = 1 peak
    const std::size_t glitch = static_cast<std::size_t>(std::lround(1.06 / w.sample_dt));
    auto corrupted = w.voltages[0];
    corrupted[glitch] += 0.9;
    const auto track = detect_extrema(w.times, corrupted, cfg);
    for (std::size_t i = 1; i < track.size(); ++i) {
        CHECK(track[i].t - track[i - 1].t > 0.4 * cfg.period);
    }

    // clean cosine at modest oversampling: nothing genuine is dropped
    for (int oversample : {8, 12, 20}) {
        WaveformConfig c2;
        c2.oversample = oversample;
        const auto w2 = synth_waveform(constant_phases({0.3}, 10.0, c2.sample_dt()), c2);
        const auto t2 = detect_extrema(w2.times, w2.voltages[0], c2);
        CHECK(static_cast<int>(t2.size()) >= 18);  // ~2 per period over 10 periods
    }
}

TEST_CASE("flat streams produce no extrema") {
    WaveformConfig cfg;
    std::vector<double> times, flat;
    for (int i = 0; i < 50; ++i) {
        times.push_back(i * cfg.sample_dt());
        flat.push_back(0.25);
    }
    CHECK(detect_extrema(times, flat, cfg).empty());
}

TEST_CASE("phase estimation anchors at extrema") {
    WaveformConfig cfg;
    const auto w = synth_waveform(constant_phases({0.0}, 10.0, cfg.sample_dt()), cfg);
    const auto track = detect_extrema(w.times, w.voltages[0], cfg);
    REQUIRE(track.size() >= 4);

    // before the second extremum: unavailable
    CHECK_FALSE(estimate_phase(track, track[0].t).has_value());

    // exactly at an anchor: the anchor phase, within the one-sample lag bound
    const auto at_anchor = estimate_phase(track, track[2].t);
    REQUIRE(at_anchor.has_value());
    const double anchor_phase = track[2].kind == ExtremumKind::Peak ? 0.0 : kPi;
    CHECK(circular_distance(*at_anchor, anchor_phase) <= kTwoPi / cfg.oversample + 1e-9);

    // halfway between a peak and the following valley: about pi/2
    double peak_t = -1.0, valley_t = -1.0;
    for (std::size_t i = 2; i + 1 < track.size(); ++i) {
        if (track[i].kind == ExtremumKind::Peak && track[i + 1].kind == ExtremumKind::Valley) {
            peak_t = track[i].t;
            valley_t = track[i + 1].t;
            break;
        }
    }
    REQUIRE(peak_t >= 0.0);
    const auto halfway = estimate_phase(track, 0.5 * (peak_t + valley_t));
    REQUIRE(halfway.has_value());
    // the true real-time phase halfway is pi/2 plus sampling error
    CHECK(circular_distance(*halfway, kPi / 2.0) <= kTwoPi / cfg.oversample + 1e-9);
}

TEST_CASE("relative phase recovers characteristic phases") {
    WaveformConfig cfg;
    const std::vector<double> phases = {0.0, kPi, 1.3};
    const auto w = synth_waveform(constant_phases(phases, 10.0, cfg.sample_dt()), cfg);
    std::vector<ExtremaTrack> tracks;
    for (const auto& stream : w.voltages) tracks.push_back(detect_extrema(w.times, stream, cfg));

    const double t = 8.0;
    const double tolerance = 2.0 * kTwoPi / cfg.oversample;

    const auto self = relative_phase(tracks[0], tracks[0], t);
    REQUIRE(self.has_value());
    CHECK(circular_distance(*self, 0.0) == doctest::Approx(0.0));

    const auto anti = relative_phase(tracks[0], tracks[1], t);
    REQUIRE(anti.has_value());
    CHECK(circular_distance(*anti, kPi) <= tolerance);

    const auto generic = relative_phase(tracks[0], tracks[2], t);
    REQUIRE(generic.has_value());
    CHECK(circular_distance(*generic, 1.3) <= tolerance);
}

TEST_CASE("reference at pi shifts every characteristic phase consistently") {
    WaveformConfig cfg;
    const std::vector<double> phases = {kPi, 0.4, 2.0};  // bias node in the down state
    const auto w = synth_waveform(constant_phases(phases, 10.0, cfg.sample_dt()), cfg);
    std::vector<ExtremaTrack> tracks;
    for (const auto& stream : w.voltages) tracks.push_back(detect_extrema(w.times, stream, cfg));

    const double tolerance = 2.0 * kTwoPi / cfg.oversample;
    for (std::size_t i = 1; i < phases.size(); ++i) {
        const auto rel = relative_phase(tracks[0], tracks[i], 8.0);
        REQUIRE(rel.has_value());
        const double expect = std::fmod(phases[i] - kPi + kTwoPi, kTwoPi);
        CHECK(circular_distance(*rel, expect) <= tolerance);
    }
}

TEST_CASE("end-to-end recovery over random phase vectors") {
    Rng rng(2718);
    for (int quantized = 0; quantized < 2; ++quantized) {
        WaveformConfig cfg;
        if (quantized) cfg.quant_bits = 8;
        const double tolerance = 2.0 * kTwoPi / cfg.oversample;
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 2 + static_cast<int>(rng.uniform_int(5));
            std::vector<double> phases(n);
            phases[0] = 0.0;  // reference oscillator
            for (int i = 1; i < n; ++i) phases[i] = rng.uniform(0.0, kTwoPi);

            const auto w = synth_waveform(constant_phases(phases, 6.0, cfg.sample_dt()), cfg);
            std::vector<ExtremaTrack> tracks;
            for (const auto& stream : w.voltages) tracks.push_back(detect_extrema(w.times, stream, cfg));
            for (int i = 1; i < n; ++i) {
                const auto rel = relative_phase(tracks[0], tracks[i], 5.0);
                REQUIRE(rel.has_value());
                CHECK(circular_distance(*rel, phases[i]) <= tolerance + 1e-9);
            }
        }
    }
}

TEST_CASE("slow phase drift stays within the drift bound") {
    WaveformConfig cfg;
    const double drift_rate = 0.01 * kTwoPi / cfg.period;  // |dphi/dt| <= 0.01 * 2pi/T
    PhaseTrajectory traj;
    for (double t = 0.0; t <= 12.0 + 1e-12; t += cfg.sample_dt()) {
        traj.times.push_back(t);
        traj.psi.push_back({0.0, 1.0 + drift_rate * t});
    }
    const auto w = synth_waveform(traj, cfg);
    const auto ref = detect_extrema(w.times, w.voltages[0], cfg);
    const auto osc = detect_extrema(w.times, w.voltages[1], cfg);

    const double tolerance = 2.0 * kTwoPi / cfg.oversample + drift_rate * cfg.period;
    for (double t = 4.0; t <= 11.0; t += 0.7) {
        const auto rel = relative_phase(ref, osc, t);
        REQUIRE(rel.has_value());
        const double expect = std::fmod(1.0 + drift_rate * t, kTwoPi);
        CHECK(circular_distance(*rel, expect) <= tolerance);
    }
}

TEST_CASE("waveform debug dump is a dense CSV") {
    WaveformConfig cfg;
    const auto w = synth_waveform(constant_phases({0.0, kPi}, 2.0, cfg.sample_dt()), cfg);
    const auto path = std::filesystem::temp_directory_path() / "caim_waveforms.csv";
    write_waveforms_csv(w, path.string());
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,v_0,v_1");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == w.times.size());
    std::filesystem::remove(path);
}

TEST_CASE("waveform config validation") {
    WaveformConfig cfg;
    cfg.oversample = 2;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
    cfg.oversample = 20;
    cfg.period = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
}
