#include "sdapd/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "sdapd/attack.hpp"
#include "sdapd/countermeasures.hpp"
#include "sdapd/csv.hpp"

namespace sdapd {

const char* to_string(AnalysisKind k) {
    switch (k) {
        case AnalysisKind::blinding_sweep: return "blinding_sweep";
        case AnalysisKind::control_curve: return "control_curve";
        case AnalysisKind::dark_scan: return "dark_scan";
        case AnalysisKind::bb84: return "bb84";
        case AnalysisKind::capacitive_vs_bias: return "capacitive_vs_bias";
        case AnalysisKind::criteria_eval: return "criteria_eval";
    }
    return "?";
}

namespace {

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::filesystem::path& path, int line, const std::string& msg) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_number(const Entry& e, const std::filesystem::path& path) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(e.value, &pos);
        if (pos != e.value.size()) throw std::invalid_argument(e.value);
        return v;
    } catch (const std::exception&) {
        fail(path, e.line, "field '" + e.key + "': bad number '" + e.value + "'");
    }
}

long parse_integer(const Entry& e, const std::filesystem::path& path) {
    const double v = parse_number(e, path);
    if (std::abs(v - std::round(v)) > 1e-9) {
        fail(path, e.line, "field '" + e.key + "': expected an integer");
    }
    return std::lround(v);
}

bool parse_bool(const Entry& e, const std::filesystem::path& path) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    fail(path, e.line, "field '" + e.key + "': expected true/false");
}

// Accepts "a, b, c" lists and "start:step:stop" ranges (inclusive stop).
std::vector<double> parse_number_list(const Entry& e, const std::filesystem::path& path) {
    std::vector<double> out;
    if (e.value.find(':') != std::string::npos) {
        double a = 0, st = 0, b = 0;
        if (std::sscanf(e.value.c_str(), "%lf:%lf:%lf", &a, &st, &b) != 3 || st <= 0) {
            fail(path, e.line, "field '" + e.key + "': expected start:step:stop");
        }
        for (double v = a; v <= b + st * 1e-9; v += st) out.push_back(v);
        return out;
    }
    std::stringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            fail(path, e.line, "field '" + e.key + "': bad number '" + item + "'");
        }
    }
    if (out.empty()) fail(path, e.line, "field '" + e.key + "': empty list");
    return out;
}

std::vector<double> scaled(std::vector<double> v, double factor) {
    for (double& x : v) x *= factor;
    return v;
}

void require_increasing(const std::vector<double>& v, const std::string& field,
                        const std::filesystem::path& path) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] <= v[i - 1]) {
            throw std::runtime_error(path.string() + ": field '" + field +
                                     "': values must be strictly increasing");
        }
    }
}

// Allowed keys per section; analysis-specific sections are checked after
// the analysis kind is known.
const std::set<std::string> kScenarioKeys = {"name", "analysis", "seed", "output",
                                             "periods"};
const std::set<std::string> kDetectorKeys = {
    "dc_bias",       "gate_frequency",       "bias_resistor", "temperature",
    "filter_enabled", "discrimination_level", "sample_rate"};
const std::set<std::string> kSweepKeys = {"energies_pj", "levels_mv", "reductions_v"};
const std::set<std::string> kAttackKeys = {
    "blinding_energies_pj", "trigger_start_pj", "trigger_step_pj", "trigger_max_pj",
    "blinding_energy_pj",   "trigger_energy_pj", "n_qubits",       "channel_loss_db",
    "pulse_energy_pj"};
const std::set<std::string> kMonitorKeys = {"window_s", "threshold_a"};

}  // namespace

Scenario load_scenario(const std::filesystem::path& path,
                       const Calibration* base_calibration) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("scenario: cannot open '" + path.string() + "'");
    }

    std::vector<Entry> entries;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(path, lineno, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "scenario" && section != "detector" && section != "calibration" &&
                section != "sweep" && section != "attack" && section != "monitor") {
                fail(path, lineno, "unknown section '" + section + "'");
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(path, lineno, "expected 'key = value'");
        if (section.empty()) fail(path, lineno, "key outside any [section]");
        entries.push_back(Entry{section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), lineno});
    }

    Scenario sc;
    if (base_calibration) sc.detector.cal = *base_calibration;
    sc.periods = -1;  // resolved per analysis below

    // First pass: the [scenario] section (analysis kind gates the rest).
    bool have_name = false, have_analysis = false, have_output = false;
    for (const Entry& e : entries) {
        if (e.section != "scenario") continue;
        if (!kScenarioKeys.count(e.key)) fail(path, e.line, "unknown field '" + e.key + "'");
        if (e.key == "name") {
            sc.name = e.value;
            have_name = true;
        } else if (e.key == "analysis") {
            have_analysis = true;
            if (e.value == "blinding_sweep") sc.analysis = AnalysisKind::blinding_sweep;
            else if (e.value == "control_curve") sc.analysis = AnalysisKind::control_curve;
            else if (e.value == "dark_scan") sc.analysis = AnalysisKind::dark_scan;
            else if (e.value == "bb84") sc.analysis = AnalysisKind::bb84;
            else if (e.value == "capacitive_vs_bias") sc.analysis = AnalysisKind::capacitive_vs_bias;
            else if (e.value == "criteria_eval") sc.analysis = AnalysisKind::criteria_eval;
            else fail(path, e.line, "field 'analysis': unknown analysis '" + e.value + "'");
        } else if (e.key == "seed") {
            sc.seed = static_cast<std::uint64_t>(parse_integer(e, path));
        } else if (e.key == "output") {
            sc.output = e.value;
            have_output = true;
        } else if (e.key == "periods") {
            sc.periods = parse_integer(e, path);
            if (sc.periods < 1) fail(path, e.line, "field 'periods': must be >= 1");
        }
    }
    if (!have_name) throw std::runtime_error(path.string() + ": missing field 'name'");
    if (!have_analysis) throw std::runtime_error(path.string() + ": missing field 'analysis'");
    if (!have_output) throw std::runtime_error(path.string() + ": missing field 'output'");

    // Remaining sections.
    for (const Entry& e : entries) {
        if (e.section == "scenario") continue;
        if (e.section == "detector") {
            if (!kDetectorKeys.count(e.key)) fail(path, e.line, "unknown field '" + e.key + "'");
            if (e.key == "dc_bias") sc.detector.dc_bias = parse_number(e, path);
            else if (e.key == "gate_frequency") sc.detector.gate_frequency = parse_number(e, path);
            else if (e.key == "bias_resistor") sc.detector.bias_resistor = parse_number(e, path);
            else if (e.key == "temperature") sc.detector.temperature = parse_number(e, path);
            else if (e.key == "filter_enabled") sc.detector.filter_enabled = parse_bool(e, path);
            else if (e.key == "discrimination_level")
                sc.detector.discrimination_level = parse_number(e, path);
            else if (e.key == "sample_rate") sc.detector.sample_rate = parse_number(e, path);
        } else if (e.section == "calibration") {
            try {
                apply_calibration_entry(sc.detector.cal, e.key, e.value);
            } catch (const std::exception& ex) {
                fail(path, e.line, ex.what());
            }
        } else if (e.section == "sweep") {
            if (!kSweepKeys.count(e.key)) fail(path, e.line, "unknown field '" + e.key + "'");
            if (e.key == "energies_pj") {
                sc.sweep_energies = scaled(parse_number_list(e, path), 1e-12);
                for (double v : sc.sweep_energies) {
                    if (v < 0) fail(path, e.line, "field 'energies_pj': negative energy_per_pulse");
                }
            } else if (e.key == "levels_mv") {
                sc.dark_levels = scaled(parse_number_list(e, path), 1e-3);
            } else if (e.key == "reductions_v") {
                sc.bias_reductions = parse_number_list(e, path);
            }
        } else if (e.section == "attack") {
            if (!kAttackKeys.count(e.key)) fail(path, e.line, "unknown field '" + e.key + "'");
            if (e.key == "blinding_energies_pj")
                sc.blinding_energies = scaled(parse_number_list(e, path), 1e-12);
            else if (e.key == "trigger_start_pj") sc.trigger_start = parse_number(e, path) * 1e-12;
            else if (e.key == "trigger_step_pj") sc.trigger_step = parse_number(e, path) * 1e-12;
            else if (e.key == "trigger_max_pj") sc.trigger_max = parse_number(e, path) * 1e-12;
            else if (e.key == "blinding_energy_pj") sc.blinding_energy = parse_number(e, path) * 1e-12;
            else if (e.key == "trigger_energy_pj") {
                sc.trigger_energy = parse_number(e, path) * 1e-12;
                if (sc.trigger_energy < 0)
                    fail(path, e.line, "field 'energy_per_pulse': must be >= 0");
            } else if (e.key == "n_qubits") {
                sc.n_qubits = parse_integer(e, path);
                if (sc.n_qubits < 1) fail(path, e.line, "field 'n_qubits': must be >= 1");
            } else if (e.key == "channel_loss_db") {
                sc.channel_loss_db = parse_number(e, path);
            } else if (e.key == "pulse_energy_pj") {
                sc.criteria_pulse_energy = parse_number(e, path) * 1e-12;
            }
        } else if (e.section == "monitor") {
            if (!kMonitorKeys.count(e.key)) fail(path, e.line, "unknown field '" + e.key + "'");
            if (e.key == "window_s") sc.monitor_window = parse_number(e, path);
            else if (e.key == "threshold_a") sc.monitor_threshold = parse_number(e, path);
        }
    }

    // Per-analysis required fields and defaults.
    switch (sc.analysis) {
        case AnalysisKind::blinding_sweep:
            if (sc.sweep_energies.empty())
                throw std::runtime_error(path.string() + ": missing field 'energies_pj'");
            require_increasing(sc.sweep_energies, "energies_pj", path);
            if (sc.periods < 0) sc.periods = 480;
            break;
        case AnalysisKind::control_curve:
            if (sc.blinding_energies.empty())
                throw std::runtime_error(path.string() + ": missing field 'blinding_energies_pj'");
            require_increasing(sc.blinding_energies, "blinding_energies_pj", path);
            if (sc.trigger_step <= 0 || sc.trigger_start <= 0 || sc.trigger_max < sc.trigger_start)
                throw std::runtime_error(path.string() + ": invalid trigger grid fields");
            if (sc.periods < 0) sc.periods = 960;
            break;
        case AnalysisKind::dark_scan:
            if (sc.dark_levels.empty()) {
                for (double l = 0.5e-3; l <= 30e-3 + 1e-12; l += 0.5e-3)
                    sc.dark_levels.push_back(l);
            }
            require_increasing(sc.dark_levels, "levels_mv", path);
            if (sc.periods < 0) sc.periods = 200000;
            break;
        case AnalysisKind::bb84:
            if (sc.periods < 0) sc.periods = 960;
            break;
        case AnalysisKind::capacitive_vs_bias:
            if (sc.bias_reductions.empty())
                throw std::runtime_error(path.string() + ": missing field 'reductions_v'");
            require_increasing(sc.bias_reductions, "reductions_v", path);
            if (sc.periods < 0) sc.periods = 1920;
            break;
        case AnalysisKind::criteria_eval:
            if (sc.periods < 0) sc.periods = 960;
            break;
    }

    sc.detector.apply_calibration(sc.detector.cal);
    sc.detector.validate();
    return sc;
}

namespace {

std::filesystem::path sibling_output(const std::filesystem::path& base,
                                     const std::string& suffix) {
    std::filesystem::path p = base;
    p.replace_filename(p.stem().string() + suffix + p.extension().string());
    return p;
}

std::vector<double> trigger_grid(const Scenario& sc) {
    std::vector<double> grid;
    for (double e = sc.trigger_start; e <= sc.trigger_max + sc.trigger_step * 1e-9;
         e += sc.trigger_step) {
        grid.push_back(e);
    }
    return grid;
}

}  // namespace

RunArtifacts run_scenario(const Scenario& sc, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path out_path = out_dir / sc.output;
    RunArtifacts artifacts;

    switch (sc.analysis) {
        case AnalysisKind::blinding_sweep: {
            auto sweep = blinding_sweep(sc.detector, sc.sweep_energies, sc.periods, sc.seed);
            CsvWriter csv(out_path,
                          {"energy_J", "mean_pre_sd_peak_V", "std_pre_sd_peak_V",
                           "mean_sd_peak_V", "std_sd_peak_V", "max_sd_peak_V", "blinded"});
            for (const auto& pt : sweep) {
                double max_sd = 0.0;
                for (double p : pt.sd.per_period_peaks) max_sd = std::max(max_sd, p);
                csv.field(pt.energy)
                    .field(pt.pre_sd.mean_peak)
                    .field(pt.pre_sd.std_peak)
                    .field(pt.sd.mean_peak)
                    .field(pt.sd.std_peak)
                    .field(max_sd)
                    .field(pt.blinded);
                csv.end_row();
            }
            artifacts.outputs.push_back(out_path);
            break;
        }
        case AnalysisKind::control_curve: {
            CsvWriter csv(out_path, {"blinding_energy_J", "trigger_energy_J",
                                     "detection_probability", "clicks", "trigger_gates"});
            const std::filesystem::path eq1_path = sibling_output(out_path, "_eq1");
            CsvWriter eq1csv(eq1_path, {"blinding_energy_J", "e_never_J", "e_always_J",
                                        "feasible", "max_silent_detection", "note"});
            const auto grid = trigger_grid(sc);
            for (std::size_t i = 0; i < sc.blinding_energies.size(); ++i) {
                const double blind = sc.blinding_energies[i];
                auto curve = control_curve(sc.detector, blind, grid, sc.periods,
                                           sc.seed + 1000 * i);
                for (const auto& pt : curve) {
                    csv.field(blind)
                        .field(pt.trigger_energy)
                        .field(pt.detection_probability)
                        .field(pt.clicks)
                        .field(pt.trigger_gates);
                    csv.end_row();
                }
                const Eq1Report rep = eq1_feasibility(curve);
                eq1csv.field(blind)
                    .field(rep.e_never ? *rep.e_never : -1.0)
                    .field(rep.e_always ? *rep.e_always : -1.0)
                    .field(rep.feasible)
                    .field(rep.max_silent_detection)
                    .field(rep.note.empty() ? std::string("ok") : rep.note);
                eq1csv.end_row();
            }
            artifacts.outputs.push_back(out_path);
            artifacts.outputs.push_back(eq1_path);
            break;
        }
        case AnalysisKind::dark_scan: {
            auto scan = dark_count_scan(sc.detector, sc.dark_levels, sc.periods, sc.seed);
            CsvWriter csv(out_path, {"level_V", "dark_rate"});
            for (const auto& [level, rate] : scan) {
                csv.field(level).field(rate);
                csv.end_row();
            }
            artifacts.outputs.push_back(out_path);
            break;
        }
        case AnalysisKind::bb84: {
            AttackParams params;
            params.blinding_energy = sc.blinding_energy;
            params.trigger_energy = sc.trigger_energy;
            params.trigger_rate = sc.detector.gate_frequency / 2.0;
            params.periods = sc.periods;
            const Bb84SessionResult res = run_bb84_fake_state(
                sc.detector, params, sc.n_qubits, sc.seed, sc.channel_loss_db);
            CsvWriter csv(out_path,
                          {"n_qubits", "sifted_key_length", "qber", "eve_information",
                           "detection_rate_at_bob", "p_click_full", "p_click_half"});
            char qber[40] = "no_data";
            if (res.qber) std::snprintf(qber, sizeof qber, "%.9g", *res.qber);
            csv.field(sc.n_qubits)
                .field(res.sifted_key_length)
                .field(std::string(qber))
                .field(res.eve_information)
                .field(res.detection_rate_at_bob)
                .field(res.p_click_full)
                .field(res.p_click_half);
            csv.end_row();
            artifacts.outputs.push_back(out_path);
            break;
        }
        case AnalysisKind::capacitive_vs_bias: {
            auto scan = capacitive_response_vs_bias(sc.detector, sc.bias_reductions,
                                                    sc.periods, sc.seed);
            CsvWriter csv(out_path,
                          {"bias_reduction_V", "mean_cap_peak_V", "std_cap_peak_V"});
            for (const auto& pt : scan) {
                csv.field(pt.bias_reduction)
                    .field(pt.pre_sd.mean_peak)
                    .field(pt.pre_sd.std_peak);
                csv.end_row();
            }
            artifacts.outputs.push_back(out_path);
            break;
        }
        case AnalysisKind::criteria_eval: {
            PhotocurrentMonitor monitor;
            monitor.averaging_window = sc.monitor_window;
            if (sc.monitor_threshold > 0.0) {
                monitor.alarm_threshold = sc.monitor_threshold;
            } else {
                // Threshold that catches the c.w. equivalent: half the steady
                // c.w. blinding current.
                Illumination cw;
                cw.duration = 512.0 / sc.detector.gate_frequency;
                cw.rng_seed = sc.seed;
                PulseTrain t;
                t.kind = PulseKind::cw;
                t.repetition_rate = sc.detector.gate_frequency;
                t.energy_per_pulse = sc.criteria_pulse_energy;
                cw.trains.push_back(t);
                GateRunOptions o;
                o.periods = 512;
                o.record_waveform = false;
                o.record_states = false;
                monitor.alarm_threshold =
                    0.5 * run_gates(sc.detector, cw, o).mean_photocurrent;
            }

            auto suite = default_attack_suite(sc.detector, sc.criteria_pulse_energy,
                                              sc.periods, sc.seed);
            const CriteriaReport rep =
                evaluate_criteria(sc.detector, suite, monitor, sc.seed);

            CsvWriter csv(out_path, {"criterion", "verdict", "evidence"});
            csv.field(std::string("baseline"))
                .field(std::string(rep.baseline_compromised ? "fail" : "pass"))
                .field(rep.baseline_evidence);
            csv.end_row();
            for (const CriterionResult* c : rep.all()) {
                csv.field(c->name).field(std::string(to_string(c->verdict))).field(c->evidence);
                csv.end_row();
            }
            artifacts.outputs.push_back(out_path);

            std::cout << "criteria report (" << sc.name << ")\n";
            std::cout << "  baseline: " << (rep.baseline_compromised ? "fail" : "pass")
                      << "  " << rep.baseline_evidence << "\n";
            for (const CriterionResult* c : rep.all()) {
                std::cout << "  " << c->name << ": " << to_string(c->verdict) << "  "
                          << c->evidence << "\n";
            }
            break;
        }
    }
    return artifacts;
}

}  // namespace sdapd
