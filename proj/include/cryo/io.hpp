#pragma once

#include "cryo/waveform.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cryo::io {

/// Shortest text that reads back to the same double: printf %.17g.
std::string fmt(double v);

std::string read_text(const std::filesystem::path& p);
/// Writes to a sibling temporary file and renames it over `p`.
void atomic_write(const std::filesystem::path& p, const std::string& content);

// Waveform CSV: header `t_ns,value`, one row per sample, LF endings.
std::string waveform_csv(const Waveform& x);
Waveform parse_waveform_csv(const std::string& text);
// Waveform JSON: {"t0": .., "sample_period": .., "samples": [..]}
std::string waveform_json(const Waveform& x);
Waveform parse_waveform_json(const std::string& text);
/// Dispatches on the extension (.json or anything else as CSV).
Waveform load_waveform(const std::filesystem::path& p);

/// Rows of `t_ns,value,stderr`.
std::string series_csv(const Eigen::VectorXd& t, const Eigen::VectorXd& value,
                       const Eigen::VectorXd& stderr_);

/// Matrix with axis header row and axis first column:
///   corner,col_0,col_1,...
///   row_0,m00,m01,...
struct AxisMatrix {
    std::string corner;
    Eigen::VectorXd col_axis;
    Eigen::VectorXd row_axis;
    Eigen::MatrixXd values; // rows x cols
};
std::string axis_matrix_csv(const AxisMatrix& m);
AxisMatrix parse_axis_matrix_csv(const std::string& text);

/// Splits one CSV line on commas; no quoting support (none of the formats need it).
std::vector<std::string> split_csv_line(const std::string& line);
double parse_double(const std::string& field, const std::string& context);

} // namespace cryo::io
