#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace si3::csv {

// Reads a rectangular numeric CSV (comma separated, no header). Lines that
// are empty or start with '#' are skipped.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

// Writes with max_digits10 precision so values round-trip exactly.
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

std::vector<std::string> split(const std::string& line, char sep = ',');

std::string format_double(double value, int decimals);

}  // namespace si3::csv
