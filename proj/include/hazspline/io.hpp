#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hazspline/evidence.hpp"
#include "hazspline/outputs.hpp"

namespace hazspline {

/// Input error tied to a file position; line is 1-based, 0 when not applicable.
class InputError : public std::runtime_error {
public:
    InputError(const std::string& source, std::size_t line, const std::string& message);
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines;  ///< source line of each row

    /// Column index of `name`, or npos.
    [[nodiscard]] std::size_t column(const std::string& name) const;
};

/// Comma-separated file with a header row. Fields may be double-quoted.
/// Blank lines and lines starting with '#' are skipped.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text, const std::string& source);

/// Columns time, event, then the named covariates.
std::vector<IndividualRecord> read_individual(const std::filesystem::path& path,
                                              const std::vector<std::string>& covariates);
/// Columns start, stop, n, r, then the named covariates.
std::vector<ExternalRow> read_external(const std::filesystem::path& path, const std::vector<std::string>& covariates);
/// Columns start, rate. Times share the unit of the survival data.
BackgroundHazard read_background(const std::filesystem::path& path);

/// Numeric matrix with a header, written at round-trip precision.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& values);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>& header);

/// Columns quantity, label, t, median, lower, upper, level.
std::string summary_csv(const SummaryTable& table);
std::string summary_json(const SummaryTable& table);

/// Shortest decimal text that reads back as the same double.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace hazspline
