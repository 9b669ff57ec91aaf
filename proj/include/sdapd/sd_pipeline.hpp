#pragma once

#include <cstdint>
#include <vector>

namespace sdapd {

/// Uniformly sampled voltage trace with gate-period metadata.
///
/// The sample buffer always spans a whole number of gate periods; every
/// transform in the pipeline preserves that alignment.
struct Waveform {
    std::vector<double> samples;     ///< volts
    double sample_rate = 0.0;        ///< Hz
    int gate_period_samples = 0;     ///< samples per detector gate
    double start_time = 0.0;         ///< seconds

    long period_count() const {
        return gate_period_samples > 0
                   ? static_cast<long>(samples.size()) / gate_period_samples
                   : 0;
    }

    /// Throws std::invalid_argument if the metadata is inconsistent
    /// (gate period < 16 samples, or length not a whole number of periods).
    void validate() const;
};

/// Per-period peak amplitudes with their sample mean and population
/// standard deviation.
struct PeakStats {
    std::vector<double> per_period_peaks;  ///< volts, one entry per period
    double mean_peak = 0.0;
    double std_peak = 0.0;
    long period_count = 0;

    static PeakStats from_peaks(std::vector<double> peaks);
};

/// Software self-differencing: subtract the trace delayed by one gate
/// period. The first period subtracts zero padding, so output length
/// equals input length and the transform is linear.
Waveform sd_transform(const Waveform& w);

/// Per-period maxima (no interpolation) plus mean / population std.
/// `skip_periods` drops leading periods before collecting statistics;
/// SD outputs conventionally drop one warm-up period.
PeakStats peak_stats(const Waveform& w, long skip_periods = 0);

struct ClickCount {
    long count = 0;
    double rate = 0.0;  ///< count / period_count
};

/// Number of per-period peaks strictly above `threshold`.
ClickCount count_clicks(const PeakStats& stats, double threshold);

}  // namespace sdapd
