#pragma once

#include <aftexp/sample.hpp>
#include <aftexp/survival.hpp>

#include <string>
#include <vector>

namespace aftexp {

struct DatasetSchema
{
    std::string time_column = "time";
    std::string status_column = "status";  // 1 = event, 0 = censored
    std::vector<std::string> covariate_columns;
    bool standardize = false;
};

struct Dataset
{
    SurvivalSample<double> sample;
    std::vector<std::string> covariate_names;
    Index n_rows = 0;     // data rows in the file
    Index n_dropped = 0;  // rows dropped for missing values
    std::vector<double> column_means;  // before standardization
    std::vector<double> column_sds;
};

/// Splits one CSV record; handles double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);

/// Empty, NA, NaN and "." cells count as missing.
bool is_missing_cell(const std::string& cell);

/// Parses a header-first, comma-separated file. Rows with a missing value in
/// any selected column are dropped; covariates are optionally centred and
/// scaled by their sample SD.
Dataset read_csv(const std::string& path, const DatasetSchema& schema);

/// Same as read_csv on in-memory text (`origin` names it in error messages).
Dataset parse_csv(const std::string& text, const DatasetSchema& schema,
                  const std::string& origin = "<input>");

/// Plot-ready step curve: (0, 1), one row per jump, and an end row at the largest follow-up time.
std::string km_curve_csv(const KaplanMeierCurve<double>& curve, double max_time);

/// Writes to a temporary sibling and renames it over the destination.
void write_file_atomic(const std::string& path, const std::string& content);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

} // namespace aftexp
