#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sdapd/calibration.hpp"
#include "sdapd/sd_pipeline.hpp"

namespace sdapd {

/// Operating point of the gated self-differencing APD detector.
struct DetectorConfig {
    double dc_bias = 64.2;               ///< V
    double breakdown_voltage = 61.2;     ///< V (calibration constant)
    double gate_frequency = 625e6;       ///< Hz
    double gate_amplitude = 5.0;         ///< V (calibration constant)
    double bias_resistor = 1000.0;       ///< ohm; 0 removes the droop mechanism
    double apd_capacitance = 2e-12;      ///< F
    double temperature = -40.0;          ///< Celsius, informational
    bool filter_enabled = true;          ///< internal feed-through filter
    double discrimination_level = 0.025; ///< V, on the SD output
    double sample_rate = 20e9;           ///< Hz; must be integer multiple of gate_frequency

    Calibration cal{};

    double nominal_excess() const { return dc_bias - breakdown_voltage; }
    double gate_period() const { return 1.0 / gate_frequency; }
    int samples_per_gate() const;

    /// Enforce Geiger-mode operating invariants; throws std::invalid_argument.
    void validate() const;

    /// Copy breakdown/gate/capacitance constants from a loaded calibration.
    void apply_calibration(const Calibration& c);
};

enum class PulseKind { blinding, trigger, signal_photon, cw };

const char* to_string(PulseKind k);

/// One optical pulse train reaching the detector input.
struct PulseTrain {
    PulseKind kind = PulseKind::blinding;
    double repetition_rate = 625e6;  ///< Hz
    double energy_per_pulse = 0.0;   ///< J; for cw: energy per gate period
    double pulse_width = 100e-12;    ///< s
    double phase_offset = 0.0;       ///< s relative to gate centre
    long pulse_count = 0;            ///< 0 = continuous
    double start_time = 0.0;         ///< s; continuous trains ignore this
};

/// Everything Eve (or the lab) shines at the detector during one run.
struct Illumination {
    std::vector<PulseTrain> trains;
    double duration = 0.0;    ///< s, whole number of gate periods
    std::uint64_t rng_seed = 1;

    static Illumination dark(double duration, std::uint64_t seed);
    static Illumination blinding(double energy, double duration, std::uint64_t seed);
};

/// Instantaneous electrical state of the APD.
struct DetectorState {
    double excess_voltage = 0.0;           ///< V above breakdown; negative = blinded
    double accumulated_photocurrent = 0.0; ///< A, instantaneous
    double trapped_carriers = 0.0;         ///< a.u., drives afterpulses when enabled
};

struct StateSample {
    double time = 0.0;
    double excess_voltage = 0.0;
    double photocurrent = 0.0;
};

/// Probability that the gate fires an avalanche given the per-gate optical
/// energy. Zero when blinded (excess_voltage <= 0); monotone non-decreasing
/// in both energy and excess voltage. Includes the dark term when the
/// calibrated dark rate is nonzero.
double avalanche_probability(const DetectorConfig& cfg, const DetectorState& state,
                             double pulse_energy);

/// Median output amplitude of an avalanche fired at this state; the gate
/// simulation multiplies this by lognormal gate-to-gate noise whose sigma
/// widens as the excess voltage collapses.
double avalanche_amplitude(const DetectorConfig& cfg, const DetectorState& state,
                           double pulse_energy);

/// Lognormal sigma of the avalanche amplitude at this excess voltage.
double avalanche_amplitude_sigma(const DetectorConfig& cfg, const DetectorState& state);

/// Advance the bias droop by dt under a constant photocurrent: the excess
/// voltage relaxes toward nominal with tau = R*C while the resistor drop
/// R*I pulls the steady point down. With bias_resistor = 0 the supply pins
/// the node at nominal.
DetectorState bias_droop_step(const DetectorConfig& cfg, const DetectorState& state,
                              double photocurrent, double dt);

/// Linear-mode (blinded) output peak for a pulse of energy E arriving with
/// the detector at excess voltage U: gain collapses with droop depth and
/// the output stage compresses toward the rail.
double linear_response(const DetectorConfig& cfg, double pulse_energy, double excess_voltage);

/// Capacitive feed-through amplitude at the given excess voltage (before
/// the internal filter).
double capacitive_amplitude(const DetectorConfig& cfg, double excess_voltage);

struct GateRunOptions {
    long periods = 480;          ///< recorded gate periods
    int warmup_gates = -1;       ///< -1: use calibration default
    bool record_waveform = true;
    bool record_states = true;
    int state_stride = 1;        ///< record every Nth sample
    bool relax_bias_check = false;  ///< allow sub-breakdown bias (dark probes)
};

/// Everything one simulated run produces. The per-period peak arrays are
/// computed streaming with the same arithmetic as sd_transform/peak_stats
/// so that long runs do not need the full sample buffer.
struct GateRunResult {
    std::optional<Waveform> pre_sd;          ///< present if record_waveform
    std::vector<StateSample> states;         ///< strided, if record_states
    std::vector<double> pre_sd_period_peaks; ///< one per recorded period
    std::vector<double> sd_period_peaks;     ///< SD peaks, period 0 vs zero pad
    DetectorState final_state;
    double mean_photocurrent = 0.0;          ///< A over the recorded span
};

/// Core gate-by-gate simulation. Deterministic for a fixed
/// (config, illumination, seed, options) tuple.
GateRunResult run_gates(const DetectorConfig& cfg, const Illumination& illum,
                        const GateRunOptions& opts);

struct SimulationResult {
    Waveform pre_sd;
    std::vector<StateSample> states;
};

/// Spec-level entry point: full pre-SD waveform of duration*sample_rate
/// samples plus the detector state time series.
SimulationResult simulate_response(const DetectorConfig& cfg, const Illumination& illum);

}  // namespace sdapd
