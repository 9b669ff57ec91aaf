#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdapd/detector.hpp"
#include "sdapd/sd_pipeline.hpp"

namespace sdapd {

/// Thrown when an operation requires a blinded detector and the requested
/// blinding energy does not actually blind it. Distinct from any curve
/// value so callers cannot mistake it for a 100% detection result.
class NotBlindedError : public std::runtime_error {
public:
    explicit NotBlindedError(const std::string& what) : std::runtime_error(what) {}
};

struct AttackParams {
    double blinding_energy = 11.55e-12;  ///< J per pulse at the gate rate
    double trigger_energy = 13.312e-12;  ///< J per pulse at trigger_rate
    double trigger_rate = 312.5e6;       ///< Hz, half the gate rate
    long periods = 960;                  ///< gate periods per measurement
};

struct BlindingSweepPoint {
    double energy = 0.0;  ///< J per blinding pulse
    PeakStats pre_sd;
    PeakStats sd;
    bool blinded = false;  ///< every SD peak below the discrimination level
};

/// Sweep blinding pulse energy; for each point collect pre-SD and SD
/// per-period peak statistics over `periods` consecutive gates in the
/// illuminated steady state and report the blinded verdict.
std::vector<BlindingSweepPoint> blinding_sweep(const DetectorConfig& cfg,
                                               const std::vector<double>& energies,
                                               long periods, std::uint64_t seed);

struct ControlCurvePoint {
    double trigger_energy = 0.0;       ///< J
    double detection_probability = 0;  ///< over trigger-bearing gates only
    long clicks = 0;
    long trigger_gates = 0;
};

/// Detection probability vs trigger pulse energy with the detector held
/// blinded at `blind` joules per gate. Trigger pulses run at half the gate
/// rate; probability counts clicks in trigger-bearing gates only.
/// Throws NotBlindedError if `blind` does not blind the detector.
std::vector<ControlCurvePoint> control_curve(const DetectorConfig& cfg, double blind,
                                             const std::vector<double>& trigger_energies,
                                             long periods, std::uint64_t seed);

struct Eq1Report {
    std::optional<double> e_never;   ///< largest tested energy with probability 0
    std::optional<double> e_always;  ///< smallest tested energy with probability 1
    bool feasible = false;           ///< e_always <= 2 * e_never
    double max_silent_detection = 0.0;  ///< max probability at E <= 2 * e_never
    std::string note;                ///< reason when infeasible / undefined
};

/// Extract the perfect-control feasibility condition from a measured curve.
/// Only exact 0 and exact 1 probabilities define the endpoints, so values
/// strictly between never move them.
Eq1Report eq1_feasibility(const std::vector<ControlCurvePoint>& curve);

/// Trigger energy seen by each of the two detectors in Bob's basis:
/// full energy on Eve's bit detector when bases match, an even split
/// across the pair when they do not.
std::pair<double, double> fake_state_split(double trigger_energy, bool bases_match);

struct Bb84SessionResult {
    long sifted_key_length = 0;
    std::optional<double> qber;     ///< absent when no sifted bits ("no data")
    double eve_information = 0.0;   ///< fraction of sifted key known to Eve
    double detection_rate_at_bob = 0.0;
    double p_click_full = 0.0;      ///< measured click prob at trigger_energy
    double p_click_half = 0.0;      ///< measured click prob at trigger_energy/2
};

/// Intercept-resend fake-state session: Alice -> Eve (random basis
/// measurement) -> Bob (four blinded SD APDs driven through the simulated
/// control curve). Channel loss thins Eve's resent states. Double clicks
/// are assigned a random bit and counted in the QBER denominator.
Bb84SessionResult run_bb84_fake_state(const DetectorConfig& cfg, const AttackParams& params,
                                      long n_qubits, std::uint64_t seed,
                                      double channel_loss_db);

}  // namespace sdapd
