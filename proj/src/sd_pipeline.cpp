#include "sdapd/sd_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sdapd {

void Waveform::validate() const {
    if (gate_period_samples < 16) {
        throw std::invalid_argument(
            "Waveform: gate_period_samples must be >= 16, got " +
            std::to_string(gate_period_samples));
    }
    if (sample_rate <= 0.0) {
        throw std::invalid_argument("Waveform: sample_rate must be positive");
    }
    if (samples.size() % static_cast<std::size_t>(gate_period_samples) != 0) {
        throw std::invalid_argument(
            "Waveform: length " + std::to_string(samples.size()) +
            " is not a whole number of gate periods (" +
            std::to_string(gate_period_samples) + " samples each)");
    }
}

PeakStats PeakStats::from_peaks(std::vector<double> peaks) {
    PeakStats s;
    s.per_period_peaks = std::move(peaks);
    s.period_count = static_cast<long>(s.per_period_peaks.size());
    if (s.period_count == 0) return s;

    double sum = 0.0;
    for (double p : s.per_period_peaks) sum += p;
    s.mean_peak = sum / static_cast<double>(s.period_count);

    double var = 0.0;
    for (double p : s.per_period_peaks) {
        const double d = p - s.mean_peak;
        var += d * d;
    }
    // Population variance: the statistic describes the collected window.
    s.std_peak = std::sqrt(var / static_cast<double>(s.period_count));
    return s;
}

Waveform sd_transform(const Waveform& w) {
    w.validate();
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.gate_period_samples = w.gate_period_samples;
    out.start_time = w.start_time;
    out.samples.resize(w.samples.size());

    const std::size_t g = static_cast<std::size_t>(w.gate_period_samples);
    const std::size_t n = w.samples.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double delayed = (i >= g) ? w.samples[i - g] : 0.0;
        out.samples[i] = w.samples[i] - delayed;
    }
    return out;
}

PeakStats peak_stats(const Waveform& w, long skip_periods) {
    w.validate();
    if (skip_periods < 0) {
        throw std::invalid_argument("peak_stats: skip_periods must be >= 0");
    }
    const long periods = w.period_count();
    const long first = std::min<long>(skip_periods, periods);
    const std::size_t g = static_cast<std::size_t>(w.gate_period_samples);

    std::vector<double> peaks;
    peaks.reserve(static_cast<std::size_t>(periods - first));
    for (long p = first; p < periods; ++p) {
        const auto begin = w.samples.begin() + static_cast<long>(g) * p;
        peaks.push_back(*std::max_element(begin, begin + static_cast<long>(g)));
    }
    return PeakStats::from_peaks(std::move(peaks));
}

ClickCount count_clicks(const PeakStats& stats, double threshold) {
    if (threshold <= 0.0) {
        throw std::invalid_argument("count_clicks: threshold must be positive");
    }
    ClickCount c;
    for (double p : stats.per_period_peaks) {
        if (p > threshold) ++c.count;
    }
    c.rate = stats.period_count > 0
                 ? static_cast<double>(c.count) / static_cast<double>(stats.period_count)
                 : 0.0;
    return c;
}

}  // namespace sdapd
