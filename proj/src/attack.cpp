#include "sdapd/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sdapd {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step; decorrelates per-point streams from one base seed.
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d49b3b29ac4f1bULL;
    return z ^ (z >> 31);
}

bool all_below(const std::vector<double>& peaks, double level, std::size_t skip) {
    for (std::size_t i = skip; i < peaks.size(); ++i) {
        if (peaks[i] >= level) return false;
    }
    return true;
}

PeakStats stats_skipping_first(const std::vector<double>& peaks) {
    if (peaks.size() <= 1) return PeakStats::from_peaks({});
    return PeakStats::from_peaks(std::vector<double>(peaks.begin() + 1, peaks.end()));
}

}  // namespace

std::vector<BlindingSweepPoint> blinding_sweep(const DetectorConfig& cfg,
                                               const std::vector<double>& energies,
                                               long periods, std::uint64_t seed) {
    for (std::size_t i = 1; i < energies.size(); ++i) {
        if (energies[i] <= energies[i - 1]) {
            throw std::invalid_argument("blinding_sweep: energies must be increasing");
        }
    }
    if (periods < 1) {
        throw std::invalid_argument("blinding_sweep: periods must be >= 1");
    }

    std::vector<BlindingSweepPoint> out;
    out.reserve(energies.size());
    const double duration = static_cast<double>(periods) / cfg.gate_frequency;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        Illumination il = Illumination::blinding(energies[i], duration, mix_seed(seed, i));
        GateRunOptions opts;
        opts.periods = periods;
        opts.record_waveform = false;
        opts.record_states = false;
        GateRunResult run = run_gates(cfg, il, opts);

        BlindingSweepPoint pt;
        pt.energy = energies[i];
        // Period 0 subtracts zero padding in the SD output; drop it from
        // both statistics and the blinded verdict (warm-up gate convention).
        pt.pre_sd = stats_skipping_first(run.pre_sd_period_peaks);
        pt.sd = stats_skipping_first(run.sd_period_peaks);
        pt.blinded = all_below(run.sd_period_peaks, cfg.discrimination_level, 1);
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<ControlCurvePoint> control_curve(const DetectorConfig& cfg, double blind,
                                             const std::vector<double>& trigger_energies,
                                             long periods, std::uint64_t seed) {
    for (std::size_t i = 1; i < trigger_energies.size(); ++i) {
        if (trigger_energies[i] <= trigger_energies[i - 1]) {
            throw std::invalid_argument("control_curve: energies must be increasing");
        }
    }
    // Precondition: the blinding energy alone must blind the detector.
    {
        auto check = blinding_sweep(cfg, {blind}, std::max<long>(480, periods),
                                    mix_seed(seed, 0xb11d));
        if (!check[0].blinded) {
            throw NotBlindedError("control_curve: detector is not blinded at " +
                                  std::to_string(blind * 1e12) + " pJ per pulse");
        }
    }

    const double duration = static_cast<double>(periods) / cfg.gate_frequency;
    std::vector<ControlCurvePoint> out;
    out.reserve(trigger_energies.size());
    for (std::size_t i = 0; i < trigger_energies.size(); ++i) {
        Illumination il;
        il.duration = duration;
        il.rng_seed = mix_seed(seed, 100 + i);

        PulseTrain b;
        b.kind = PulseKind::blinding;
        b.repetition_rate = cfg.gate_frequency;
        b.energy_per_pulse = blind;
        il.trains.push_back(b);

        PulseTrain t;
        t.kind = PulseKind::trigger;
        t.repetition_rate = cfg.gate_frequency / 2.0;
        t.energy_per_pulse = trigger_energies[i];
        il.trains.push_back(t);

        GateRunOptions opts;
        opts.periods = periods;
        opts.record_waveform = false;
        opts.record_states = false;
        GateRunResult run = run_gates(cfg, il, opts);

        // Trigger pulses land on even recorded periods (warm-up is even);
        // count clicks over trigger-bearing gates only, skipping period 0.
        ControlCurvePoint pt;
        pt.trigger_energy = trigger_energies[i];
        for (std::size_t p = 2; p < run.sd_period_peaks.size(); p += 2) {
            ++pt.trigger_gates;
            if (run.sd_period_peaks[p] > cfg.discrimination_level) ++pt.clicks;
        }
        pt.detection_probability =
            pt.trigger_gates > 0
                ? static_cast<double>(pt.clicks) / static_cast<double>(pt.trigger_gates)
                : 0.0;
        out.push_back(pt);
    }
    return out;
}

Eq1Report eq1_feasibility(const std::vector<ControlCurvePoint>& curve) {
    if (curve.empty()) {
        throw std::invalid_argument("eq1_feasibility: curve must be non-empty");
    }
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double p = curve[i].detection_probability;
        if (p < 0.0 || p > 1.0) {
            throw std::invalid_argument("eq1_feasibility: probability out of range");
        }
        if (i > 0 && curve[i].trigger_energy <= curve[i - 1].trigger_energy) {
            throw std::invalid_argument("eq1_feasibility: curve must be sorted by energy");
        }
    }

    Eq1Report rep;
    for (const ControlCurvePoint& pt : curve) {
        if (pt.detection_probability == 0.0) rep.e_never = pt.trigger_energy;
        if (pt.detection_probability == 1.0 && !rep.e_always) {
            rep.e_always = pt.trigger_energy;
        }
    }
    if (!rep.e_never) {
        rep.feasible = false;
        rep.max_silent_detection = 0.0;
        rep.note = "no zero-probability point: E_never undefined";
        return rep;
    }
    const double silent_limit = 2.0 * *rep.e_never;
    for (const ControlCurvePoint& pt : curve) {
        if (pt.trigger_energy <= silent_limit) {
            rep.max_silent_detection =
                std::max(rep.max_silent_detection, pt.detection_probability);
        }
    }
    if (!rep.e_always) {
        rep.feasible = false;
        rep.note = "detection probability never reaches 1";
        return rep;
    }
    rep.feasible = *rep.e_always <= silent_limit;
    if (!rep.feasible) rep.note = "E_always exceeds 2 x E_never";
    return rep;
}

std::pair<double, double> fake_state_split(double trigger_energy, bool bases_match) {
    if (bases_match) return {trigger_energy, 0.0};
    return {trigger_energy / 2.0, trigger_energy / 2.0};
}

Bb84SessionResult run_bb84_fake_state(const DetectorConfig& cfg, const AttackParams& params,
                                      long n_qubits, std::uint64_t seed,
                                      double channel_loss_db) {
    if (n_qubits < 1) {
        throw std::invalid_argument("run_bb84_fake_state: n_qubits must be >= 1");
    }

    Bb84SessionResult res;
    if (params.trigger_energy > 0.0) {
        // Bob's click probabilities come from the simulated control curve,
        // sampled at the two energies the fake state can deliver.
        const double half = params.trigger_energy / 2.0;
        auto curve = control_curve(cfg, params.blinding_energy,
                                   {half, params.trigger_energy}, params.periods,
                                   mix_seed(seed, 0xcc));
        res.p_click_half = curve[0].detection_probability;
        res.p_click_full = curve[1].detection_probability;
    } else {
        // Zero trigger energy: still require the blinded precondition.
        auto check = blinding_sweep(cfg, {params.blinding_energy}, 480, mix_seed(seed, 0xb));
        if (!check[0].blinded) {
            throw NotBlindedError("run_bb84_fake_state: detector not blinded");
        }
    }

    const double transmission = std::pow(10.0, -channel_loss_db / 10.0);
    std::mt19937_64 rng(mix_seed(seed, 0x5e55));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto coin = [&]() { return u(rng) < 0.5; };

    long detections = 0;
    long sifted = 0;
    long errors = 0;
    long eve_known = 0;

    for (long i = 0; i < n_qubits; ++i) {
        const bool a_basis = coin();
        const bool a_bit = coin();
        const bool e_basis = coin();
        const bool e_bit = (e_basis == a_basis) ? a_bit : coin();
        const bool b_basis = coin();

        if (u(rng) >= transmission) continue;  // fake state lost in the channel

        bool click0 = false;  // detector for bit 0 in Bob's basis
        bool click1 = false;
        if (params.trigger_energy > 0.0) {
            if (b_basis == e_basis) {
                const bool click = u(rng) < res.p_click_full;
                click0 = click && !e_bit;
                click1 = click && e_bit;
            } else {
                click0 = u(rng) < res.p_click_half;
                click1 = u(rng) < res.p_click_half;
            }
        }
        if (!click0 && !click1) continue;
        ++detections;

        bool bob_bit;
        if (click0 && click1) {
            bob_bit = coin();  // double click: random assignment
        } else {
            bob_bit = click1;
        }

        if (b_basis != a_basis) continue;  // discarded at sifting
        ++sifted;
        if (bob_bit != a_bit) ++errors;
        if (e_basis == b_basis) ++eve_known;
    }

    res.sifted_key_length = sifted;
    res.detection_rate_at_bob =
        static_cast<double>(detections) / static_cast<double>(n_qubits);
    if (sifted > 0) {
        res.qber = static_cast<double>(errors) / static_cast<double>(sifted);
        res.eve_information =
            static_cast<double>(eve_known) / static_cast<double>(sifted);
    }
    return res;
}

}  // namespace sdapd
