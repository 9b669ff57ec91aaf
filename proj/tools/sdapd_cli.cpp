// sdapd command-line front end.
//
// Subcommands:
//   run     execute scenario files and write their CSV artifacts
//   scan    one-off sweeps without a scenario file
//   ingest  run the SD pipeline over an external waveform capture
//   report  pretty-print an artifact CSV; --eq1 re-derives the Eq-style
//           feasibility table from a control-curve CSV
//
// Exit codes: 0 success, 1 validation error, 2 runtime error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sdapd/attack.hpp"
#include "sdapd/calibration.hpp"
#include "sdapd/countermeasures.hpp"
#include "sdapd/csv.hpp"
#include "sdapd/scenario.hpp"
#include "sdapd/waveform_io.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string pj(double joules) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4g pJ", joules * 1e12);
    return buf;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path.string() + ": empty CSV");
    return rows;
}

void print_table(const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& row : rows) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::cout << (i ? "  " : "");
            std::cout << row[i] << std::string(widths[i] - row[i].size(), ' ');
        }
        std::cout << "\n";
    }
}

int cmd_run(const std::vector<std::string>& files, const std::string& out_dir,
            const std::string& cal_path, long seed_override) {
    sdapd::Calibration base;
    const sdapd::Calibration* base_ptr = nullptr;
    if (!cal_path.empty()) {
        base = sdapd::load_calibration(cal_path);
        base_ptr = &base;
    }
    for (const std::string& file : files) {
        sdapd::Scenario sc;
        try {
            sc = sdapd::load_scenario(file, base_ptr);
        } catch (const std::exception& ex) {
            std::cerr << "validation error: " << ex.what() << "\n";
            return kExitValidation;
        }
        if (seed_override >= 0) sc.seed = static_cast<std::uint64_t>(seed_override);
        std::cout << "running scenario '" << sc.name << "' ("
                  << sdapd::to_string(sc.analysis) << ", seed " << sc.seed << ")\n";
        const auto artifacts = sdapd::run_scenario(sc, out_dir);
        for (const auto& p : artifacts.outputs) {
            std::cout << "  wrote " << p.string() << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gated self-differencing APD detector simulator and attack bench"};
    app.require_subcommand(1);

    // --- run ---
    auto* run = app.add_subcommand("run", "execute scenario files");
    std::vector<std::string> run_files;
    std::string out_dir = "out";
    std::string cal_path;
    long seed_override = -1;
    run->add_option("scenarios", run_files, "scenario files")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--calibration", cal_path, "calibration file");
    run->add_option("--seed", seed_override, "override the scenario seed");

    // --- scan ---
    auto* scan = app.add_subcommand("scan", "one-off sweeps (no scenario file)");
    std::string scan_kind;
    std::vector<double> scan_values;
    long scan_periods = -1;
    long scan_seed = 1;
    std::string scan_out;
    double scan_blind_pj = 11.55;
    scan->add_option("kind", scan_kind, "blinding | dark | capacitive | control")
        ->required()
        ->check(CLI::IsMember({"blinding", "dark", "capacitive", "control"}));
    scan->add_option("--values", scan_values,
                     "grid: pJ (blinding/control), mV (dark), V (capacitive)");
    scan->add_option("--periods", scan_periods, "gate periods per point");
    scan->add_option("--seed", scan_seed, "RNG seed");
    scan->add_option("--csv", scan_out, "write CSV here instead of stdout table");
    scan->add_option("--blind-pj", scan_blind_pj, "blinding energy for control scans");
    scan->add_option("--calibration", cal_path, "calibration file");

    // --- ingest ---
    auto* ingest = app.add_subcommand("ingest", "SD pipeline over a waveform capture");
    std::string ingest_path;
    double ingest_threshold = 0.025;
    std::string ingest_export;
    bool ingest_raw_stats = false;
    ingest->add_option("file", ingest_path, "waveform file")->required();
    ingest->add_option("--threshold", ingest_threshold, "click threshold (V)");
    ingest->add_option("--export", ingest_export, "re-export the parsed waveform");
    ingest->add_flag("--pre-sd", ingest_raw_stats, "report pre-SD statistics too");

    // --- report ---
    auto* report = app.add_subcommand("report", "pretty-print an artifact CSV");
    std::string report_path;
    bool report_eq1 = false;
    report->add_option("file", report_path, "CSV artifact")->required();
    report->add_flag("--eq1", report_eq1,
                     "treat input as a control-curve CSV and derive the feasibility table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return cmd_run(run_files, out_dir, cal_path, seed_override);
        }

        if (*scan) {
            sdapd::DetectorConfig cfg;
            if (!cal_path.empty()) cfg.apply_calibration(sdapd::load_calibration(cal_path));
            else cfg.apply_calibration(cfg.cal);

            if (scan_kind == "blinding") {
                if (scan_values.empty())
                    scan_values = {0.001, 0.01, 0.1, 1, 2, 4, 6, 7, 7.76, 8.09,
                                   8.92,  10.24, 11.55, 16.51, 21.47, 24.77, 28.06,
                                   31.36, 40,    61.09};
                std::vector<double> joules;
                for (double v : scan_values) joules.push_back(v * 1e-12);
                const long periods = scan_periods > 0 ? scan_periods : 480;
                auto sweep = sdapd::blinding_sweep(cfg, joules, periods,
                                                   static_cast<std::uint64_t>(scan_seed));
                std::vector<std::vector<std::string>> rows{
                    {"energy", "mean_pre_sd", "mean_sd", "std_sd", "max_sd", "blinded"}};
                for (const auto& pt : sweep) {
                    double mx = 0;
                    for (double p : pt.sd.per_period_peaks) mx = std::max(mx, p);
                    char a[32], b[32], c[32], d[32];
                    std::snprintf(a, 32, "%.2f mV", pt.pre_sd.mean_peak * 1e3);
                    std::snprintf(b, 32, "%.2f mV", pt.sd.mean_peak * 1e3);
                    std::snprintf(c, 32, "%.2f mV", pt.sd.std_peak * 1e3);
                    std::snprintf(d, 32, "%.2f mV", mx * 1e3);
                    rows.push_back({pj(pt.energy), a, b, c, d, pt.blinded ? "yes" : "no"});
                }
                print_table(rows);
            } else if (scan_kind == "dark") {
                std::vector<double> levels;
                if (scan_values.empty()) {
                    for (double l = 0.5; l <= 30.0; l += 0.5) levels.push_back(l * 1e-3);
                } else {
                    for (double v : scan_values) levels.push_back(v * 1e-3);
                }
                const long periods = scan_periods > 0 ? scan_periods : 200000;
                auto scan_res = sdapd::dark_count_scan(cfg, levels, periods,
                                                       static_cast<std::uint64_t>(scan_seed));
                std::vector<std::vector<std::string>> rows{{"level", "dark_rate"}};
                for (const auto& [level, rate] : scan_res) {
                    char a[32], b[32];
                    std::snprintf(a, 32, "%.1f mV", level * 1e3);
                    std::snprintf(b, 32, "%.3g", rate);
                    rows.push_back({a, b});
                }
                print_table(rows);
                if (auto kink = sdapd::dark_scan_kink(scan_res)) {
                    std::printf("kink at %.1f mV\n", *kink * 1e3);
                }
            } else if (scan_kind == "capacitive") {
                std::vector<double> reductions = scan_values;
                if (reductions.empty()) {
                    for (double r = 0.0; r <= 5.0 + 1e-9; r += 0.5) reductions.push_back(r);
                }
                const long periods = scan_periods > 0 ? scan_periods : 1920;
                auto scan_res = sdapd::capacitive_response_vs_bias(
                    cfg, reductions, periods, static_cast<std::uint64_t>(scan_seed));
                std::vector<std::vector<std::string>> rows{{"reduction", "mean_peak", "std"}};
                for (const auto& pt : scan_res) {
                    char a[32], b[32], c[32];
                    std::snprintf(a, 32, "%.2f V", pt.bias_reduction);
                    std::snprintf(b, 32, "%.2f mV", pt.pre_sd.mean_peak * 1e3);
                    std::snprintf(c, 32, "%.3f mV", pt.pre_sd.std_peak * 1e3);
                    rows.push_back({a, b, c});
                }
                print_table(rows);
            } else if (scan_kind == "control") {
                std::vector<double> grid;
                if (scan_values.empty()) {
                    for (double e = 0.832; e <= 40.0; e += 0.832) grid.push_back(e * 1e-12);
                } else {
                    for (double v : scan_values) grid.push_back(v * 1e-12);
                }
                const long periods = scan_periods > 0 ? scan_periods : 960;
                auto curve = sdapd::control_curve(cfg, scan_blind_pj * 1e-12, grid, periods,
                                                  static_cast<std::uint64_t>(scan_seed));
                std::vector<std::vector<std::string>> rows{{"trigger", "probability", "clicks"}};
                for (const auto& pt : curve) {
                    char b[32];
                    std::snprintf(b, 32, "%.4f", pt.detection_probability);
                    rows.push_back({pj(pt.trigger_energy), b, std::to_string(pt.clicks)});
                }
                print_table(rows);
                const auto rep = sdapd::eq1_feasibility(curve);
                std::printf("e_never = %s, e_always = %s, feasible = %s, max_silent = %.4f\n",
                            rep.e_never ? pj(*rep.e_never).c_str() : "n/a",
                            rep.e_always ? pj(*rep.e_always).c_str() : "n/a",
                            rep.feasible ? "true" : "false", rep.max_silent_detection);
            }
            return 0;
        }

        if (*ingest) {
            sdapd::Waveform w;
            try {
                w = sdapd::ingest_waveform(ingest_path);
                w.validate();
            } catch (const std::exception& ex) {
                std::cerr << "validation error: " << ex.what() << "\n";
                return kExitValidation;
            }
            if (!ingest_export.empty()) {
                sdapd::export_waveform(w, ingest_export);
                std::cout << "exported " << ingest_export << "\n";
            }
            const sdapd::Waveform sd = sdapd::sd_transform(w);
            const sdapd::PeakStats stats = sdapd::peak_stats(sd, 1);
            const auto clicks = sdapd::count_clicks(stats, ingest_threshold);
            std::printf("periods: %ld (first excluded from SD statistics)\n",
                        w.period_count());
            if (ingest_raw_stats) {
                const sdapd::PeakStats pre = sdapd::peak_stats(w);
                std::printf("pre-SD peaks: mean %.6g V, std %.6g V\n", pre.mean_peak,
                            pre.std_peak);
            }
            std::printf("SD peaks: mean %.6g V, std %.6g V\n", stats.mean_peak,
                        stats.std_peak);
            std::printf("clicks above %.4g V: %ld (rate %.6g)\n", ingest_threshold,
                        clicks.count, clicks.rate);
            return 0;
        }

        if (*report) {
            auto rows = read_csv(report_path);
            if (report_eq1) {
                // Group a control-curve CSV by its blinding-energy column.
                if (rows[0].size() < 5 || rows[0][0] != "blinding_energy_J") {
                    std::cerr << "validation error: not a control-curve CSV\n";
                    return kExitValidation;
                }
                std::map<double, std::vector<sdapd::ControlCurvePoint>> curves;
                for (std::size_t i = 1; i < rows.size(); ++i) {
                    sdapd::ControlCurvePoint pt;
                    const double blind = std::stod(rows[i][0]);
                    pt.trigger_energy = std::stod(rows[i][1]);
                    pt.detection_probability = std::stod(rows[i][2]);
                    curves[blind].push_back(pt);
                }
                std::vector<std::vector<std::string>> table{
                    {"blinding", "e_never", "e_always", "feasible", "max_silent"}};
                for (auto& [blind, curve] : curves) {
                    const auto rep = sdapd::eq1_feasibility(curve);
                    char silent[32];
                    std::snprintf(silent, 32, "%.4f", rep.max_silent_detection);
                    table.push_back({pj(blind), rep.e_never ? pj(*rep.e_never) : "n/a",
                                     rep.e_always ? pj(*rep.e_always) : "n/a",
                                     rep.feasible ? "true" : "false", silent});
                }
                print_table(table);
            } else {
                print_table(rows);
            }
            return 0;
        }
    } catch (const std::invalid_argument& ex) {
        std::cerr << "validation error: " << ex.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
