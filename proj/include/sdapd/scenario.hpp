#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdapd/detector.hpp"

namespace sdapd {

enum class AnalysisKind {
    blinding_sweep,
    control_curve,
    dark_scan,
    bb84,
    capacitive_vs_bias,
    criteria_eval,
};

const char* to_string(AnalysisKind k);

/// One experiment description, fully resolved and validated. Produced by
/// load_scenario from the sectioned key = value format documented in
/// data/scenarios/ (strict mode: unknown keys are rejected).
struct Scenario {
    std::string name;
    AnalysisKind analysis = AnalysisKind::blinding_sweep;
    std::uint64_t seed = 1;
    std::string output;  ///< CSV file name, relative to the output directory
    long periods = 0;    ///< gate periods per measurement point

    DetectorConfig detector;

    // blinding_sweep
    std::vector<double> sweep_energies;  ///< J
    // dark_scan
    std::vector<double> dark_levels;  ///< V
    // capacitive_vs_bias
    std::vector<double> bias_reductions;  ///< V
    // control_curve
    std::vector<double> blinding_energies;  ///< J
    double trigger_start = 0.832e-12;       ///< J
    double trigger_step = 0.832e-12;        ///< J
    double trigger_max = 40e-12;            ///< J
    // bb84
    double blinding_energy = 11.55e-12;  ///< J
    double trigger_energy = 13.312e-12;  ///< J
    long n_qubits = 100000;
    double channel_loss_db = 10.0;
    // criteria_eval
    double criteria_pulse_energy = 11.55e-12;  ///< J
    double monitor_window = 2e-4;              ///< s
    double monitor_threshold = 0.0;            ///< A; 0 = half the c.w. current
};

/// Parse and validate a scenario file. Throws std::runtime_error with the
/// file name and line number on parse errors, and with the offending field
/// name on validation errors. `base_calibration`, when given, replaces the
/// built-in defaults before the scenario's own [calibration] overrides.
Scenario load_scenario(const std::filesystem::path& path,
                       const Calibration* base_calibration = nullptr);

struct RunArtifacts {
    std::vector<std::filesystem::path> outputs;
};

/// Execute the scenario and write its CSV artifacts under out_dir.
/// Deterministic for a fixed (scenario, seed): reruns are byte-identical.
RunArtifacts run_scenario(const Scenario& s, const std::filesystem::path& out_dir);

}  // namespace sdapd
