#include "sdapd/detector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace sdapd {

namespace {

// Output pulse shape, peak normalised to 1 so calibrated amplitudes are
// peak voltages directly. Spans ~300 ps at the default 20 GS/s.
constexpr std::array<double, 6> kPulseKernel = {0.25, 0.70, 1.00, 0.62, 0.28, 0.10};

double kernel_weight_sum() {
    double s = 0.0;
    for (double k : kPulseKernel) s += k;
    return s;
}

// Linear-mode multiplication under droop: holds near unity for the first
// couple of volts below breakdown (soft knee of the M(V) curve), then
// collapses on two scales toward the primary response.
double gain_suppression(const Calibration& cal, double excess_voltage) {
    const double x = excess_voltage + cal.gain_knee_volt;
    if (x >= 0.0) return 1.0;
    const double f = cal.gain_fast_fraction;
    return f * std::exp(x / cal.gain_fast_volt) +
           (1.0 - f) * std::exp(x / cal.gain_slow_volt);
}

double excess_factor(const Calibration& cal, double excess_voltage) {
    if (excess_voltage <= 0.0) return 0.0;
    return excess_voltage / (excess_voltage + cal.excess_half_volt);
}

long checked_gates_per_pulse(const DetectorConfig& cfg, const PulseTrain& t) {
    const double ratio = cfg.gate_frequency / t.repetition_rate;
    const long gates = std::lround(ratio);
    if (gates < 1 || std::abs(ratio - static_cast<double>(gates)) > 1e-6 * ratio) {
        throw std::invalid_argument(
            "PulseTrain: repetition_rate " + std::to_string(t.repetition_rate) +
            " Hz does not divide the gate frequency");
    }
    return gates;
}

}  // namespace

int DetectorConfig::samples_per_gate() const {
    const double ratio = sample_rate / gate_frequency;
    const long n = std::lround(ratio);
    if (n < 16 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio) {
        throw std::invalid_argument(
            "DetectorConfig: sample_rate must be an integer multiple (>= 16x) "
            "of gate_frequency");
    }
    return static_cast<int>(n);
}

void DetectorConfig::validate() const {
    if (dc_bias <= breakdown_voltage) {
        throw std::invalid_argument(
            "DetectorConfig: dc_bias must exceed breakdown_voltage for "
            "Geiger-mode operation");
    }
    if (bias_resistor < 0.0) {
        throw std::invalid_argument("DetectorConfig: bias_resistor must be >= 0");
    }
    if (discrimination_level <= 0.0) {
        throw std::invalid_argument(
            "DetectorConfig: discrimination_level must be positive");
    }
    if (gate_frequency <= 0.0 || apd_capacitance <= 0.0) {
        throw std::invalid_argument(
            "DetectorConfig: gate_frequency and apd_capacitance must be positive");
    }
    samples_per_gate();  // throws when the sample grid is invalid
}

void DetectorConfig::apply_calibration(const Calibration& c) {
    cal = c;
    breakdown_voltage = c.breakdown_voltage;
    gate_amplitude = c.gate_amplitude;
    apd_capacitance = c.apd_capacitance;
}

const char* to_string(PulseKind k) {
    switch (k) {
        case PulseKind::blinding: return "blinding";
        case PulseKind::trigger: return "trigger";
        case PulseKind::signal_photon: return "signal_photon";
        case PulseKind::cw: return "cw";
    }
    return "?";
}

Illumination Illumination::dark(double duration, std::uint64_t seed) {
    Illumination il;
    il.duration = duration;
    il.rng_seed = seed;
    return il;
}

Illumination Illumination::blinding(double energy, double duration, std::uint64_t seed) {
    Illumination il;
    PulseTrain t;
    t.kind = PulseKind::blinding;
    t.repetition_rate = 625e6;
    t.energy_per_pulse = energy;
    il.trains.push_back(t);
    il.duration = duration;
    il.rng_seed = seed;
    return il;
}

double avalanche_probability(const DetectorConfig& cfg, const DetectorState& state,
                             double pulse_energy) {
    if (pulse_energy < 0.0) {
        throw std::invalid_argument("avalanche_probability: pulse_energy must be >= 0");
    }
    const Calibration& cal = cfg.cal;
    if (state.excess_voltage <= 0.0) return 0.0;  // blinded: no avalanches at all

    const double f = excess_factor(cal, state.excess_voltage);
    double p_opt = 0.0;
    if (pulse_energy > 0.0) {
        const double exponent =
            cal.trigger_efficiency * (pulse_energy / cal.photon_energy) * f;
        p_opt = (exponent > 40.0) ? 1.0 : -std::expm1(-exponent);
    }
    const double p_dark =
        std::min(1.0, cal.dark_rate_hz * cfg.gate_period()) * f;
    const double p_after = std::min(1.0, cal.afterpulse_coeff * state.trapped_carriers);
    return 1.0 - (1.0 - p_opt) * (1.0 - p_dark) * (1.0 - p_after);
}

double avalanche_amplitude(const DetectorConfig& cfg, const DetectorState& state,
                           double pulse_energy) {
    const Calibration& cal = cfg.cal;
    const double u = std::max(state.excess_voltage, 0.0);
    const double boost =
        1.0 + cal.energy_boost * pulse_energy / (pulse_energy + cal.energy_boost_knee);
    return cal.avalanche_gain_per_volt * u * boost;
}

double avalanche_amplitude_sigma(const DetectorConfig& cfg, const DetectorState& state) {
    const Calibration& cal = cfg.cal;
    const double u = std::max(state.excess_voltage, 0.0);
    return cal.amp_noise_floor + (cal.amp_noise_ceiling - cal.amp_noise_floor) /
                                     (1.0 + u / cal.amp_noise_knee_volt);
}

DetectorState bias_droop_step(const DetectorConfig& cfg, const DetectorState& state,
                              double photocurrent, double dt) {
    if (dt <= 0.0) {
        throw std::invalid_argument("bias_droop_step: dt must be positive");
    }
    DetectorState next = state;
    next.accumulated_photocurrent = photocurrent;
    next.trapped_carriers = state.trapped_carriers * std::exp(-dt / cfg.cal.trap_lifetime);

    const double nominal = cfg.nominal_excess();
    if (cfg.bias_resistor <= 0.0) {
        // No series resistor: the supply pins the bias, droop mechanism gone.
        next.excess_voltage = nominal;
        return next;
    }
    const double tau = cfg.bias_resistor * cfg.apd_capacitance;
    const double settle = nominal - cfg.bias_resistor * photocurrent;
    next.excess_voltage = settle + (state.excess_voltage - settle) * std::exp(-dt / tau);
    return next;
}

double linear_response(const DetectorConfig& cfg, double pulse_energy,
                       double excess_voltage) {
    const Calibration& cal = cfg.cal;
    const double raw = cal.linear_gain_volts_per_joule * pulse_energy *
                       gain_suppression(cal, excess_voltage);
    const double rail = cal.output_rail_volts;
    return rail * -std::expm1(-raw / rail);
}

double capacitive_amplitude(const DetectorConfig& cfg, double excess_voltage) {
    const Calibration& cal = cfg.cal;
    const double reference_excess = cal.cap_reference_bias - cfg.breakdown_voltage;
    const double reduction = std::max(0.0, reference_excess - excess_voltage);
    return cal.cap_feedthrough_volts * (1.0 + cal.cap_bias_slope_per_volt * reduction);
}

namespace {

struct TrainPlan {
    const PulseTrain* train = nullptr;
    long gates_per_pulse = 1;
    long anchor = 0;       // gate index (absolute) of the first pulse
    long last_gate = -1;   // inclusive; -1 = continuous
    int arrival_sample = 0;
    bool continuous = true;
};

void validate_illumination(const DetectorConfig& cfg, const Illumination& illum) {
    bool has_blinding = false;
    for (const PulseTrain& t : illum.trains) {
        if (t.energy_per_pulse < 0.0) {
            throw std::invalid_argument("PulseTrain: energy_per_pulse must be >= 0");
        }
        if (t.repetition_rate <= 0.0) {
            throw std::invalid_argument("PulseTrain: repetition_rate must be positive");
        }
        if (t.pulse_width <= 0.0) {
            throw std::invalid_argument("PulseTrain: pulse_width must be positive");
        }
        if (t.kind == PulseKind::blinding) has_blinding = true;
    }
    for (const PulseTrain& t : illum.trains) {
        if (t.kind != PulseKind::trigger) continue;
        bool divides = false;
        for (const PulseTrain& b : illum.trains) {
            if (b.kind != PulseKind::blinding) continue;
            const double ratio = b.repetition_rate / t.repetition_rate;
            if (std::abs(ratio - std::round(ratio)) < 1e-6 * ratio) divides = true;
        }
        if (!has_blinding || !divides) {
            throw std::invalid_argument(
                "PulseTrain: trigger repetition_rate must divide a blinding "
                "train's repetition rate");
        }
    }
    const double periods = illum.duration * cfg.gate_frequency;
    if (illum.duration <= 0.0 ||
        std::abs(periods - std::round(periods)) > 1e-6 * std::max(1.0, periods)) {
        throw std::invalid_argument(
            "Illumination: duration must cover a whole number of gate periods");
    }
}

}  // namespace

GateRunResult run_gates(const DetectorConfig& cfg, const Illumination& illum,
                        const GateRunOptions& opts) {
    if (opts.relax_bias_check) {
        cfg.samples_per_gate();
        if (cfg.bias_resistor < 0.0 || cfg.discrimination_level <= 0.0) {
            throw std::invalid_argument("DetectorConfig: invalid resistor/level");
        }
    } else {
        cfg.validate();
    }
    validate_illumination(cfg, illum);
    if (opts.periods < 1) {
        throw std::invalid_argument("GateRunOptions: periods must be >= 1");
    }

    const Calibration& cal = cfg.cal;
    const int sg = cfg.samples_per_gate();
    const double dt = 1.0 / cfg.sample_rate;
    const double gate_period = cfg.gate_period();
    const int warmup = opts.warmup_gates >= 0 ? opts.warmup_gates : cal.warmup_gates;
    const long total_gates = warmup + opts.periods;
    const int gate_on_samples = sg / 2;
    const int gate_centre = sg / 4;

    // Per-train schedule, gate indices absolute (0 = first warm-up gate).
    std::vector<TrainPlan> plans;
    plans.reserve(illum.trains.size());
    for (const PulseTrain& t : illum.trains) {
        TrainPlan p;
        p.train = &t;
        p.gates_per_pulse = (t.kind == PulseKind::cw) ? 1 : checked_gates_per_pulse(cfg, t);
        const long start_gate = std::lround(t.start_time / gate_period);
        if (t.pulse_count > 0) {
            p.continuous = false;
            p.anchor = warmup + start_gate;
            p.last_gate = p.anchor + (t.pulse_count - 1) * p.gates_per_pulse;
        } else {
            p.continuous = true;
            p.anchor = warmup + (start_gate % p.gates_per_pulse);
        }
        const int off = gate_centre + static_cast<int>(std::lround(t.phase_offset / dt));
        p.arrival_sample = std::clamp(off, 0, sg - 1);
        plans.push_back(p);
    }

    std::mt19937_64 rng(illum.rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    // First-order high-pass on the gate feed-through.
    const double tau_f = 1.0 / (2.0 * 3.14159265358979323846 * cal.filter_cutoff_hz);
    const double alpha = tau_f / (tau_f + dt);

    const double tau_trap = cal.trap_lifetime;
    const double trap_decay = std::exp(-dt / tau_trap);
    const double kernel_sum = kernel_weight_sum();

    DetectorState state;
    state.excess_voltage = cfg.nominal_excess();

    GateRunResult result;
    if (opts.record_waveform) {
        result.pre_sd.emplace();
        result.pre_sd->sample_rate = cfg.sample_rate;
        result.pre_sd->gate_period_samples = sg;
        result.pre_sd->start_time = 0.0;
        result.pre_sd->samples.reserve(static_cast<std::size_t>(opts.periods) * sg);
    }
    result.pre_sd_period_peaks.reserve(opts.periods);
    result.sd_period_peaks.reserve(opts.periods);

    // Pending deposits from pulse kernels that may straddle gate boundaries.
    std::vector<double> pending_volts(kPulseKernel.size(), 0.0);
    std::vector<double> pending_charge(kPulseKernel.size(), 0.0);
    std::size_t pending_head = 0;

    std::vector<double> prev_period(sg, 0.0);
    double hp_y = 0.0;
    double hp_x = 0.0;
    double current_sum = 0.0;
    long current_samples = 0;
    double pre_peak = 0.0;
    double sd_peak = 0.0;
    const bool noisy = cal.electronic_noise_rms > 0.0;

    for (long g = 0; g < total_gates; ++g) {
        const bool recording = g >= warmup;
        const long rec_period = g - warmup;

        double pulsed_energy = 0.0;
        double blind_pulsed_energy = 0.0;
        double cw_energy = 0.0;
        int arrival = gate_centre;
        double arrival_energy = 0.0;
        for (const TrainPlan& p : plans) {
            const PulseTrain& t = *p.train;
            bool fires;
            if (t.kind == PulseKind::cw) {
                fires = p.continuous ? true : (g >= p.anchor && g <= p.last_gate);
                if (fires) cw_energy += t.energy_per_pulse;
                continue;
            }
            if (p.continuous) {
                fires = ((g - p.anchor) % p.gates_per_pulse + p.gates_per_pulse) %
                            p.gates_per_pulse ==
                        0;
            } else {
                fires = g >= p.anchor && g <= p.last_gate &&
                        (g - p.anchor) % p.gates_per_pulse == 0;
            }
            if (fires) {
                pulsed_energy += t.energy_per_pulse;
                if (t.kind == PulseKind::blinding) blind_pulsed_energy += t.energy_per_pulse;
                if (t.energy_per_pulse >= arrival_energy) {
                    arrival_energy = t.energy_per_pulse;
                    arrival = p.arrival_sample;
                }
            }
        }
        const double gate_energy = pulsed_energy + cw_energy;
        const double cap_amp = capacitive_amplitude(cfg, state.excess_voltage);

        pre_peak = 0.0;
        sd_peak = 0.0;
        for (int s = 0; s < sg; ++s) {
            // Gate feed-through and internal filter.
            const double x = (s < gate_on_samples) ? cap_amp : 0.0;
            double cap_out;
            if (cfg.filter_enabled) {
                hp_y = alpha * (hp_y + x - hp_x);
                hp_x = x;
                cap_out = hp_y;
            } else {
                cap_out = x;
            }

            if (s == arrival) {
                const double p_fire = avalanche_probability(cfg, state, gate_energy);
                const bool fired = p_fire > 0.0 && uniform(rng) < p_fire;
                if (fired) {
                    const double sigma = avalanche_amplitude_sigma(cfg, state);
                    const double noise_factor = std::exp(sigma * normal(rng));
                    const double amp =
                        avalanche_amplitude(cfg, state, gate_energy) * noise_factor;
                    const double q_av = cal.avalanche_charge_cap *
                                        std::max(state.excess_voltage, 0.0) *
                                        noise_factor;
                    for (std::size_t k = 0; k < kPulseKernel.size(); ++k) {
                        const std::size_t slot = (pending_head + k) % kPulseKernel.size();
                        pending_volts[slot] += amp * kPulseKernel[k];
                        pending_charge[slot] += q_av * kPulseKernel[k] / kernel_sum;
                    }
                    state.trapped_carriers += 1.0;
                }
                if (pulsed_energy > 0.0) {
                    // Intensity noise rides on the amplified blinding train;
                    // the trigger laser is comparatively quiet.
                    const double excess_blind =
                        std::max(0.0, blind_pulsed_energy - cal.rin_onset_energy);
                    const double sigma =
                        cal.linear_noise_floor_volts +
                        cal.rin_ceiling_volts * -std::expm1(-excess_blind / cal.rin_scale_energy);
                    const double v_lin = std::max(
                        0.0, linear_response(cfg, pulsed_energy, state.excess_voltage) +
                                 sigma * normal(rng));
                    // Droop charge is the primary photocurrent: it persists
                    // however far the multiplication collapses.
                    const double q_lin = cal.linear_charge_per_joule * pulsed_energy;
                    for (std::size_t k = 0; k < kPulseKernel.size(); ++k) {
                        const std::size_t slot = (pending_head + k) % kPulseKernel.size();
                        pending_volts[slot] += v_lin * kPulseKernel[k];
                        pending_charge[slot] += q_lin * kPulseKernel[k] / kernel_sum;
                    }
                }
            }

            // Photocurrent for this sample: scheduled pulse charge plus the
            // continuously spread c.w. contribution.
            double current = pending_charge[pending_head] / dt;
            if (cw_energy > 0.0) {
                current += cal.linear_charge_per_joule * cw_energy / gate_period;
            }
            const double response = pending_volts[pending_head];
            pending_volts[pending_head] = 0.0;
            pending_charge[pending_head] = 0.0;
            pending_head = (pending_head + 1) % kPulseKernel.size();

            const double nominal = cfg.nominal_excess();
            if (cfg.bias_resistor <= 0.0) {
                state.excess_voltage = nominal;
                state.accumulated_photocurrent = current;
            } else {
                const double tau = cfg.bias_resistor * cfg.apd_capacitance;
                const double settle = nominal - cfg.bias_resistor * current;
                state.excess_voltage =
                    settle + (state.excess_voltage - settle) * std::exp(-dt / tau);
                state.accumulated_photocurrent = current;
            }
            state.trapped_carriers *= trap_decay;

            double v = cap_out + response;
            if (noisy) v += cal.electronic_noise_rms * normal(rng);

            if (recording) {
                const double ref = (rec_period == 0) ? 0.0 : prev_period[s];
                const double sd = v - ref;
                prev_period[s] = v;
                if (s == 0 || v > pre_peak) pre_peak = v;
                if (s == 0 || sd > sd_peak) sd_peak = sd;

                if (result.pre_sd) result.pre_sd->samples.push_back(v);
                if (opts.record_states) {
                    const long idx = rec_period * sg + s;
                    if (idx % opts.state_stride == 0) {
                        result.states.push_back(StateSample{
                            static_cast<double>(idx) * dt, state.excess_voltage,
                            state.accumulated_photocurrent});
                    }
                }
                current_sum += current;
                ++current_samples;
            }
        }
        if (recording) {
            result.pre_sd_period_peaks.push_back(pre_peak);
            result.sd_period_peaks.push_back(sd_peak);
        }
    }

    result.final_state = state;
    result.mean_photocurrent =
        current_samples > 0 ? current_sum / static_cast<double>(current_samples) : 0.0;
    return result;
}

SimulationResult simulate_response(const DetectorConfig& cfg, const Illumination& illum) {
    const double periods_d = illum.duration * cfg.gate_frequency;
    GateRunOptions opts;
    opts.periods = std::lround(periods_d);
    GateRunResult run = run_gates(cfg, illum, opts);
    SimulationResult out;
    out.pre_sd = std::move(*run.pre_sd);
    out.states = std::move(run.states);
    return out;
}

}  // namespace sdapd
