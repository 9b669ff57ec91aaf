#pragma once

#include <filesystem>
#include <string>

namespace sdapd {

/// Phenomenological model constants for the gated APD.
///
/// Everything here is a fit constant, not a datasheet number: the defaults
/// were chosen so that the simulated detector reproduces the measured
/// anchor points of the reference device (blinding threshold, blinded
/// amplitude, control-curve endpoints, dark-count kink, capacitive
/// flatness). See data/default_calibration.cal for the shipped file and
/// docs in README for the meaning of each knob.
struct Calibration {
    // --- device constants not fixed by the operating point ---
    double breakdown_voltage = 61.2;    ///< V; nominal excess = dc_bias - this
    double gate_amplitude = 5.0;        ///< V; gate feed-through drive
    double apd_capacitance = 2e-12;     ///< F; droop recovery tau = R*C
    int warmup_gates = 64;              ///< settle gates before recording

    // --- Geiger-mode avalanche path ---
    double photon_energy = 1.282e-19;       ///< J, 1550 nm
    double trigger_efficiency = 8.0e-5;     ///< effective, absorbs coupling
    double excess_half_volt = 0.5;          ///< f(U) = U / (U + this)
    double avalanche_gain_per_volt = 0.105; ///< V output per V excess
    double energy_boost = 1.2;              ///< amplitude grows with pulse energy
    double energy_boost_knee = 2.0e-12;     ///< J
    double amp_noise_floor = 0.08;          ///< lognormal sigma at high excess
    double amp_noise_ceiling = 0.95;        ///< lognormal sigma near 0 excess
    double amp_noise_knee_volt = 0.15;
    double avalanche_charge_cap = 2.0e-13;  ///< F; avalanche charge = this * U

    // --- linear-mode (blinded) response path ---
    double linear_charge_per_joule = 0.79;         ///< C/J primary responsivity
    double linear_gain_volts_per_joule = 1.37e10;  ///< output slope before droop
    double gain_knee_volt = 2.3;                   ///< droop depth where multiplication starts collapsing
    double gain_fast_fraction = 0.15;              ///< m(U): share lost right past the knee
    double gain_fast_volt = 0.1;                   ///< m(U): fast decay scale
    double gain_slow_volt = 14.6;                  ///< m(U): slow decay scale
    double output_rail_volts = 0.140;              ///< output-stage compression
    double linear_noise_floor_volts = 6e-4;        ///< output noise at zero energy
    double rin_ceiling_volts = 3.3e-3;             ///< output noise bound from the blinding train
    double rin_onset_energy = 13e-12;              ///< J; below this the train is quiet
    double rin_scale_energy = 11e-12;              ///< J; noise approach scale past the onset

    // --- capacitive feed-through and internal filter ---
    double cap_feedthrough_volts = 0.016;  ///< unfiltered amplitude at reference bias
    double cap_bias_slope_per_volt = 0.55; ///< growth per volt of bias reduction
    double cap_reference_bias = 64.2;      ///< V
    double filter_cutoff_hz = 9.5e9;       ///< single-pole high-pass on feed-through

    // --- noise and dark counts ---
    double electronic_noise_rms = 9.0e-4;  ///< V per sample
    double dark_rate_hz = 6.25e4;          ///< dark avalanche rate (0 disables)
    double afterpulse_coeff = 0.0;         ///< off by default
    double trap_lifetime = 50e-9;          ///< s, trapped-carrier decay

    // --- discriminator selection rule ---
    double discrimination_margin = 0.019;  ///< level = dark-scan kink + margin
};

/// Parse a flat "name = value" calibration file. Lines starting with '#'
/// are comments. Unknown keys are rejected. Values use SI units throughout.
Calibration load_calibration(const std::filesystem::path& path);

/// Write every field, one key per line, in a stable order.
void save_calibration(const Calibration& cal, const std::filesystem::path& path);

/// Apply a single "name = value" assignment; throws on unknown name.
void apply_calibration_entry(Calibration& cal, const std::string& key,
                             const std::string& value);

}  // namespace sdapd
