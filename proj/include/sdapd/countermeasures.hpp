#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdapd/attack.hpp"
#include "sdapd/detector.hpp"

namespace sdapd {

struct PhotocurrentMonitor {
    double averaging_window = 1e-3;  ///< s
    double alarm_threshold = 1e-3;   ///< A
};

struct MonitorVerdict {
    bool alarm = false;
    double max_windowed_current = 0.0;  ///< A, worst sliding-window mean
};

/// Sliding-window mean of the photocurrent trace against the alarm
/// threshold. The trace must be uniformly sampled and at least one window
/// long.
MonitorVerdict monitor_photocurrent(const std::vector<StateSample>& trace,
                                    const PhotocurrentMonitor& monitor);

struct CapacitiveScanPoint {
    double bias_reduction = 0.0;  ///< V below the reference DC bias
    PeakStats pre_sd;
};

/// Dark-condition capacitive response (pre-SD) as the DC bias is reduced
/// below its operating value. With the internal filter the residual stays
/// flat and far below the discrimination level; without it the response
/// grows with the reduction and eventually crosses the level.
std::vector<CapacitiveScanPoint> capacitive_response_vs_bias(
    const DetectorConfig& cfg, const std::vector<double>& bias_reductions,
    long periods, std::uint64_t seed);

/// Ideal optical power limiter with a calibrated engagement transient:
/// instantaneous power is clamped to `limit`, so a steady pulse carries at
/// most limit * pulse_width; the first pulse may additionally leak up to
/// limit * response_time while the clamp engages.
Illumination power_limiter(const Illumination& illum, double limit, double response_time);

/// Dark count scan: one dark run thresholded at every level. The curve is
/// non-increasing by construction (shared run, rising threshold).
std::vector<std::pair<double, double>> dark_count_scan(const DetectorConfig& cfg,
                                                       const std::vector<double>& levels,
                                                       long periods, std::uint64_t seed);

/// Level at which dark avalanches take over from the noise/capacitive
/// residual as the dominant count source: the first scanned level whose
/// rate falls within a factor two of the high-level plateau.
std::optional<double> dark_scan_kink(
    const std::vector<std::pair<double, double>>& scan);

/// Criterion d) operationalised: discrimination level = dark-scan kink
/// plus the calibrated noise margin.
double recommended_discrimination_level(const DetectorConfig& cfg, std::uint64_t seed);

/// Duty-cycled blinding schedule that defeats a windowed photocurrent
/// monitor: bursts long enough to blind and be measured, spaced so every
/// window mean stays under the threshold. The search halves the duty cycle
/// (bounded by the window length) until the monitor stays quiet.
struct MonitorBypass {
    Illumination illumination;
    double duty_cycle = 0.0;
    long burst_gates = 0;
    long period_gates = 0;
};
MonitorBypass find_monitor_bypass(const DetectorConfig& cfg,
                                  const PhotocurrentMonitor& monitor,
                                  double blinding_energy, std::uint64_t seed);

enum class Verdict { pass, fail };
const char* to_string(Verdict v);

struct CriterionResult {
    std::string name;
    Verdict verdict = Verdict::fail;
    std::string evidence;
};

struct CriteriaReport {
    CriterionResult remove_bias_resistor;
    CriterionResult optical_power_limiter;
    CriterionResult remove_filter;
    CriterionResult discrimination_level_adequate;
    bool baseline_compromised = false;  ///< blinded & unalarmed under baseline
    std::string baseline_evidence;

    std::vector<const CriterionResult*> all() const {
        return {&remove_bias_resistor, &optical_power_limiter, &remove_filter,
                &discrimination_level_adequate};
    }
};

struct AttackScenario {
    std::string name;
    Illumination illumination;
    bool is_cw = false;
};

/// Build the default attack suite: a c.w. blinding scenario at the
/// blinding-equivalent mean power and a pulsed scenario at the given
/// per-pulse energy.
std::vector<AttackScenario> default_attack_suite(const DetectorConfig& cfg,
                                                 double pulse_energy, long periods,
                                                 std::uint64_t seed);

/// Run the detector + attack pipeline under each countermeasure toggle and
/// report which ones prevent (or expose) blinding. The suite must contain
/// at least one c.w. and one pulsed scenario.
CriteriaReport evaluate_criteria(const DetectorConfig& cfg,
                                 const std::vector<AttackScenario>& suite,
                                 const PhotocurrentMonitor& monitor,
                                 std::uint64_t seed);

}  // namespace sdapd
