#include "sdapd/waveform_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace sdapd {

namespace {

constexpr const char* kMagic = "# sdapd waveform v1";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string header_value(std::ifstream& in, const std::string& key,
                         const std::filesystem::path& path) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("waveform " + path.string() + ": truncated header");
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || trim(line.substr(0, eq)) != key) {
        throw std::runtime_error("waveform " + path.string() + ": expected header '" +
                                 key + " = ...', got '" + trim(line) + "'");
    }
    return trim(line.substr(eq + 1));
}

}  // namespace

void export_waveform(const Waveform& w, const std::filesystem::path& path) {
    w.validate();
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("waveform: cannot write '" + path.string() + "'");
    }
    char buf[64];
    out << kMagic << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", w.sample_rate);
    out << "sample_rate = " << buf << "\n";
    out << "gate_period_samples = " << w.gate_period_samples << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", w.start_time);
    out << "start_time = " << buf << "\n";
    out << "unit = V\n";
    for (double s : w.samples) {
        std::snprintf(buf, sizeof buf, "%.17g", s);
        out << buf << "\n";
    }
    if (!out) {
        throw std::runtime_error("waveform: write failed for '" + path.string() + "'");
    }
}

Waveform ingest_waveform(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("waveform: cannot open '" + path.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != kMagic) {
        throw std::runtime_error("waveform " + path.string() +
                                 ": missing '" + kMagic + "' magic line");
    }
    Waveform w;
    try {
        w.sample_rate = std::stod(header_value(in, "sample_rate", path));
        w.gate_period_samples = std::stoi(header_value(in, "gate_period_samples", path));
        w.start_time = std::stod(header_value(in, "start_time", path));
    } catch (const std::invalid_argument&) {
        throw std::runtime_error("waveform " + path.string() + ": malformed header number");
    }
    const std::string unit = header_value(in, "unit", path);
    if (unit != "V") {
        throw std::runtime_error("waveform " + path.string() + ": unsupported unit '" +
                                 unit + "'");
    }
    if (w.sample_rate <= 0.0 || w.gate_period_samples <= 0) {
        throw std::runtime_error("waveform " + path.string() +
                                 ": header fields must be positive");
    }

    while (std::getline(in, line)) {
        const std::string s = trim(line);
        if (s.empty()) continue;
        try {
            std::size_t pos = 0;
            w.samples.push_back(std::stod(s, &pos));
            if (pos != s.size()) throw std::invalid_argument(s);
        } catch (const std::exception&) {
            throw std::runtime_error("waveform " + path.string() +
                                     ": bad sample record '" + s + "'");
        }
    }
    if (w.samples.size() % static_cast<std::size_t>(w.gate_period_samples) != 0) {
        throw std::runtime_error(
            "waveform " + path.string() + ": record count " +
            std::to_string(w.samples.size()) + " is not a whole number of gate periods (" +
            std::to_string(w.gate_period_samples) + " samples each)");
    }
    return w;
}

}  // namespace sdapd
