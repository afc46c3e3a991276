#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cityvol/common.hpp"

namespace cityvol {

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw IoError("cannot open for writing: " + path);
        path_ = path;
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

// Whole-file CSV read; returns rows of raw string cells, header included.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

double parse_double(const std::string& cell,
                    const std::string& context = "value");
long parse_long(const std::string& cell, const std::string& context = "value");

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace cityvol
