#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shsic/errors.hpp"

namespace shsic {

struct CsvOptions {
    bool index_column = false; // first column is a row index, dropped on read
};

struct CsvTable {
    Eigen::MatrixXd values;
    std::vector<std::string> header; // empty if the file had none
};

// Comma-separated numeric matrix, UTF-8, optional header row auto-detected
// (first row kept as header when any field fails numeric parsing). Parse
// failures elsewhere throw data_error with row and column.
CsvTable read_csv(const std::string& path, const CsvOptions& opts = {});

void write_csv(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& m,
               const std::vector<std::string>& header = {}, const CsvOptions& opts = {});

// FNV-1a 64-bit over the file bytes, hex-encoded; for run manifests.
std::string file_hash(const std::string& path);

} // namespace shsic
