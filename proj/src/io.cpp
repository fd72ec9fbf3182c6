#include <aftexp/io.hpp>

#include <aftexp/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace aftexp {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_number(const std::string& cell, double& out)
{
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

} // namespace

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool is_missing_cell(const std::string& cell)
{
    const std::string t = trim(cell);
    return t.empty() || t == "NA" || t == "NaN" || t == "nan" || t == ".";
}

Dataset parse_csv(const std::string& text, const DatasetSchema& schema, const std::string& origin)
{
    if (schema.covariate_columns.empty()) {
        throw Error(ErrorKind::Usage, "no covariate columns selected");
    }
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Data, origin + ": missing header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);  // UTF-8 BOM
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> position;
    for (std::size_t k = 0; k < header.size(); ++k) position.emplace(header[k], k);
    auto column = [&](const std::string& name) {
        auto it = position.find(name);
        if (it == position.end()) throw Error(ErrorKind::Data, origin + ": missing column '" + name + "'");
        return it->second;
    };
    const std::size_t time_col = column(schema.time_column);
    const std::size_t status_col = column(schema.status_column);
    std::vector<std::size_t> cov_cols;
    for (const auto& name : schema.covariate_columns) cov_cols.push_back(column(name));
    const std::size_t p = cov_cols.size();

    std::vector<double> times;
    std::vector<int> status;
    std::vector<double> values;  // row-major
    Index rows = 0;
    Index dropped = 0;
    Index line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++rows;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorKind::Data, origin + ": line " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " fields, header has " +
                                             std::to_string(header.size()));
        }
        bool missing = is_missing_cell(cells[time_col]) || is_missing_cell(cells[status_col]);
        for (auto c : cov_cols) missing = missing || is_missing_cell(cells[c]);
        if (missing) {
            ++dropped;
            continue;
        }
        double t = 0.0;
        if (!parse_number(cells[time_col], t) || !(t > 0)) {
            throw Error(ErrorKind::Data, origin + ": line " + std::to_string(line_no) +
                                             ": time must be a strictly positive number, got '" +
                                             cells[time_col] + "'");
        }
        double s = 0.0;
        if (!parse_number(cells[status_col], s) || (s != 0.0 && s != 1.0)) {
            throw Error(ErrorKind::Data, origin + ": line " + std::to_string(line_no) +
                                             ": status must be 0 or 1, got '" + cells[status_col] + "'");
        }
        times.push_back(t);
        status.push_back(static_cast<int>(s));
        for (std::size_t k = 0; k < p; ++k) {
            double v = 0.0;
            if (!parse_number(cells[cov_cols[k]], v)) {
                throw Error(ErrorKind::Data, origin + ": line " + std::to_string(line_no) + ": column '" +
                                                 schema.covariate_columns[k] + "' is not numeric ('" +
                                                 cells[cov_cols[k]] + "')");
            }
            values.push_back(v);
        }
    }
    const auto n = static_cast<Index>(times.size());
    if (n == 0) throw Error(ErrorKind::Data, origin + ": no complete rows");

    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(times.data(), n);
    Eigen::VectorXi delta = Eigen::Map<const Eigen::VectorXi>(status.data(), n);
    Eigen::MatrixXd x =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            values.data(), n, static_cast<Index>(p));

    Dataset out;
    out.covariate_names = schema.covariate_columns;
    out.n_rows = rows;
    out.n_dropped = dropped;
    for (Index j = 0; j < x.cols(); ++j) {
        const double mean = x.col(j).mean();
        const double sd = n > 1 ? std::sqrt((x.col(j).array() - mean).square().sum() / double(n - 1)) : 0.0;
        out.column_means.push_back(mean);
        out.column_sds.push_back(sd);
        if (schema.standardize) {
            if (!(sd > 0)) {
                throw Error(ErrorKind::Data, origin + ": column '" + schema.covariate_columns[static_cast<std::size_t>(j)] +
                                                 "' is constant and cannot be standardized");
            }
            x.col(j) = (x.col(j).array() - mean) / sd;
        }
    }
    out.sample = SurvivalSample<double>(std::move(y), std::move(delta), std::move(x));
    return out;
}

Dataset read_csv(const std::string& path, const DatasetSchema& schema)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Data, "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), schema, path);
}

std::string format_double(double v)
{
    if (std::isnan(v)) return "NA";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::string km_curve_csv(const KaplanMeierCurve<double>& curve, double max_time)
{
    std::string out = "time,survival\n0,1\n";
    const auto& t = curve.jump_times();
    const auto& v = curve.values();
    for (std::size_t k = 0; k < t.size(); ++k) {
        out += format_double(t[k]) + "," + format_double(v[k]) + "\n";
    }
    if (t.empty() || max_time > t.back()) {
        out += format_double(max_time) + "," + format_double(curve.evaluate(max_time)) + "\n";
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Data, "cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush()) throw Error(ErrorKind::Data, "failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorKind::Data, "cannot move output into '" + path + "': " + ec.message());
}

} // namespace aftexp
