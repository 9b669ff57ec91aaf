#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdapd {

/// Minimal deterministic CSV writer: fixed column set, doubles printed
/// with %.9g so reruns with the same seed are byte-identical.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
        : out_(path), columns_(columns.size()) {
        if (!out_) {
            throw std::runtime_error("csv: cannot write '" + path.string() + "'");
        }
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ',';
            out_ << columns[i];
        }
        out_ << '\n';
    }

    CsvWriter& field(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return field_raw(buf);
    }
    CsvWriter& field(long v) { return field_raw(std::to_string(v)); }
    CsvWriter& field(bool v) { return field_raw(v ? "true" : "false"); }
    CsvWriter& field(const std::string& v) { return field_raw(v); }

    void end_row() {
        if (in_row_ != columns_) {
            throw std::logic_error("csv: row has " + std::to_string(in_row_) +
                                   " fields, expected " + std::to_string(columns_));
        }
        out_ << '\n';
        in_row_ = 0;
    }

private:
    CsvWriter& field_raw(const std::string& s) {
        if (in_row_) out_ << ',';
        out_ << s;
        ++in_row_;
        return *this;
    }

    std::ofstream out_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

}  // namespace sdapd
