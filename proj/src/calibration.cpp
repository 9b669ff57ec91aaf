#include "sdapd/calibration.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sdapd {

namespace {

struct Field {
    std::function<double(const Calibration&)> get;
    std::function<void(Calibration&, double)> set;
};

// Stable insertion-ordered table; drives both parsing and serialization.
const std::vector<std::pair<std::string, Field>>& field_table() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto add = [&t](const char* name, double Calibration::* member) {
            t.push_back({name,
                         Field{[member](const Calibration& c) { return c.*member; },
                               [member](Calibration& c, double v) { c.*member = v; }}});
        };
        add("breakdown_voltage", &Calibration::breakdown_voltage);
        add("gate_amplitude", &Calibration::gate_amplitude);
        add("apd_capacitance", &Calibration::apd_capacitance);
        t.push_back({"warmup_gates",
                     Field{[](const Calibration& c) { return double(c.warmup_gates); },
                           [](Calibration& c, double v) { c.warmup_gates = int(v); }}});
        add("photon_energy", &Calibration::photon_energy);
        add("trigger_efficiency", &Calibration::trigger_efficiency);
        add("excess_half_volt", &Calibration::excess_half_volt);
        add("avalanche_gain_per_volt", &Calibration::avalanche_gain_per_volt);
        add("energy_boost", &Calibration::energy_boost);
        add("energy_boost_knee", &Calibration::energy_boost_knee);
        add("amp_noise_floor", &Calibration::amp_noise_floor);
        add("amp_noise_ceiling", &Calibration::amp_noise_ceiling);
        add("amp_noise_knee_volt", &Calibration::amp_noise_knee_volt);
        add("avalanche_charge_cap", &Calibration::avalanche_charge_cap);
        add("linear_charge_per_joule", &Calibration::linear_charge_per_joule);
        add("linear_gain_volts_per_joule", &Calibration::linear_gain_volts_per_joule);
        add("gain_knee_volt", &Calibration::gain_knee_volt);
        add("gain_fast_fraction", &Calibration::gain_fast_fraction);
        add("gain_fast_volt", &Calibration::gain_fast_volt);
        add("gain_slow_volt", &Calibration::gain_slow_volt);
        add("output_rail_volts", &Calibration::output_rail_volts);
        add("linear_noise_floor_volts", &Calibration::linear_noise_floor_volts);
        add("rin_ceiling_volts", &Calibration::rin_ceiling_volts);
        add("rin_onset_energy", &Calibration::rin_onset_energy);
        add("rin_scale_energy", &Calibration::rin_scale_energy);
        add("cap_feedthrough_volts", &Calibration::cap_feedthrough_volts);
        add("cap_bias_slope_per_volt", &Calibration::cap_bias_slope_per_volt);
        add("cap_reference_bias", &Calibration::cap_reference_bias);
        add("filter_cutoff_hz", &Calibration::filter_cutoff_hz);
        add("electronic_noise_rms", &Calibration::electronic_noise_rms);
        add("dark_rate_hz", &Calibration::dark_rate_hz);
        add("afterpulse_coeff", &Calibration::afterpulse_coeff);
        add("trap_lifetime", &Calibration::trap_lifetime);
        add("discrimination_margin", &Calibration::discrimination_margin);
        return t;
    }();
    return table;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_calibration_entry(Calibration& cal, const std::string& key,
                             const std::string& value) {
    for (const auto& [name, field] : field_table()) {
        if (name == key) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(value);
                field.set(cal, v);
                return;
            } catch (const std::exception&) {
                throw std::runtime_error("calibration: bad numeric value '" +
                                         value + "' for key '" + key + "'");
            }
        }
    }
    throw std::runtime_error("calibration: unknown key '" + key + "'");
}

Calibration load_calibration(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("calibration: cannot open '" + path.string() + "'");
    }
    Calibration cal;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("calibration: " + path.string() + ":" +
                                     std::to_string(lineno) +
                                     ": expected 'name = value'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            apply_calibration_entry(cal, key, value);
        } catch (const std::exception& ex) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": " + ex.what());
        }
    }
    return cal;
}

void save_calibration(const Calibration& cal, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("calibration: cannot write '" + path.string() + "'");
    }
    out << "# sdapd detector calibration (SI units)\n";
    char buf[64];
    for (const auto& [name, field] : field_table()) {
        std::snprintf(buf, sizeof buf, "%.12g", field.get(cal));
        out << name << " = " << buf << "\n";
    }
}

}  // namespace sdapd
