#pragma once

#include <filesystem>

#include "sdapd/sd_pipeline.hpp"

namespace sdapd {

/// Plain-text waveform container: a four-line header followed by one
/// voltage sample per line, serialized with 17 significant digits so that
/// export -> ingest reproduces the doubles bit for bit.
///
///   # sdapd waveform v1
///   sample_rate = <Hz>
///   gate_period_samples = <int>
///   start_time = <s>
///   unit = V
///   <sample>
///   ...
void export_waveform(const Waveform& w, const std::filesystem::path& path);

/// Parse a waveform file; throws std::runtime_error naming the defect
/// (bad header field, record count not a whole number of periods).
Waveform ingest_waveform(const std::filesystem::path& path);

}  // namespace sdapd
