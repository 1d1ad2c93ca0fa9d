#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "chaospde/common.hpp"

namespace chaospde {

// CSV output: comma separator, '.' decimal, LF line endings, header row,
// reals at 17 significant digits. Byte-identical across platforms and runs.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw IoError("csv: cannot open '" + path + "' for writing");
    }

    static std::string fmt(double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
    static std::string fmt(std::size_t v) { return std::to_string(v); }
    static std::string fmt(int v) { return std::to_string(v); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
        if (!out_) throw IoError("csv: write failed");
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("csv: close failed");
    }

private:
    std::ofstream out_;
};

}  // namespace chaospde
