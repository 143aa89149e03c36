#include "hazspline/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hazspline {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line, const std::string& source, std::size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
            was_quoted = true;
        } else if (c == ',') {
            out.push_back(was_quoted ? field : trim(field));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    if (quoted) throw InputError(source, lineno, "unterminated quoted field");
    out.push_back(was_quoted ? field : trim(field));
    return out;
}

double parse_number(const std::string& text, const std::string& source, std::size_t line,
                    const std::string& column) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (text.empty() || ec != std::errc() || ptr != last)
        throw InputError(source, line, "column '" + column + "': '" + text + "' is not a number");
    return v;
}

struct ColumnMap {
    std::vector<std::size_t> fixed;
    std::vector<std::size_t> covariates;
};

ColumnMap map_columns(const CsvTable& t, const std::vector<std::string>& fixed,
                      const std::vector<std::string>& covariates, const std::string& source) {
    ColumnMap m;
    std::vector<std::string> missing;
    for (const auto& name : fixed) {
        m.fixed.push_back(t.column(name));
        if (m.fixed.back() == std::string::npos) missing.push_back(name);
    }
    for (const auto& name : covariates) {
        m.covariates.push_back(t.column(name));
        if (m.covariates.back() == std::string::npos) missing.push_back(name);
    }
    if (!missing.empty()) {
        std::string msg = "missing column(s):";
        for (const auto& name : missing) msg += " " + name;
        throw InputError(source, 1, msg);
    }
    return m;
}

std::vector<double> numeric_row(const CsvTable& t, std::size_t r, const std::vector<std::size_t>& cols,
                                const std::string& source) {
    std::vector<double> out;
    out.reserve(cols.size());
    for (auto c : cols) out.push_back(parse_number(t.rows[r][c], source, t.lines[r], t.header[c]));
    return out;
}

}  // namespace

InputError::InputError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? source + ":" + std::to_string(line) + ": " + message : source + ": " + message),
      line_(line) {}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::string::npos;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        auto fields = split_fields(line, source, lineno);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError(source, lineno, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                                 std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.lines.push_back(lineno);
    }
    if (!have_header) throw InputError(source, 0, "file is empty");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

std::vector<IndividualRecord> read_individual(const std::filesystem::path& path,
                                              const std::vector<std::string>& covariates) {
    const auto src = path.string();
    const auto t = read_csv(path);
    const auto m = map_columns(t, {"time", "event"}, covariates, src);
    std::vector<IndividualRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto f = numeric_row(t, r, m.fixed, src);
        if (!(f[0] > 0.0) || !std::isfinite(f[0])) throw InputError(src, t.lines[r], "time must be positive");
        if (f[1] != 0.0 && f[1] != 1.0) throw InputError(src, t.lines[r], "event must be 0 or 1");
        out.push_back({f[0], f[1] == 1.0, numeric_row(t, r, m.covariates, src)});
    }
    return out;
}

std::vector<ExternalRow> read_external(const std::filesystem::path& path, const std::vector<std::string>& covariates) {
    const auto src = path.string();
    const auto t = read_csv(path);
    const auto m = map_columns(t, {"start", "stop", "n", "r"}, covariates, src);
    std::vector<ExternalRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto f = numeric_row(t, r, m.fixed, src);
        ExternalRow row{f[0], f[1], f[2], f[3], numeric_row(t, r, m.covariates, src)};
        try {
            row.validate();
        } catch (const std::exception& e) {
            throw InputError(src, t.lines[r], e.what());
        }
        out.push_back(std::move(row));
    }
    return out;
}

BackgroundHazard read_background(const std::filesystem::path& path) {
    const auto src = path.string();
    const auto t = read_csv(path);
    const auto m = map_columns(t, {"start", "rate"}, {}, src);
    std::vector<double> start, rate;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto f = numeric_row(t, r, m.fixed, src);
        start.push_back(f[0]);
        rate.push_back(f[1]);
    }
    try {
        return BackgroundHazard(std::move(start), std::move(rate));
    } catch (const std::exception& e) {
        throw InputError(src, 0, e.what());
    }
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols())
        throw std::invalid_argument("header does not match the matrix width");
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
    out += '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j) out += ',';
            out += format_double(values(i, j));
        }
        out += '\n';
    }
    write_text(path, out);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>& header) {
    const auto src = path.string();
    const auto t = read_csv(path);
    header = t.header;
    Eigen::MatrixXd m(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            const auto& s = t.rows[r][c];
            double v;
            if (s == "nan") v = std::nan("");
            else if (s == "inf") v = INFINITY;
            else if (s == "-inf") v = -INFINITY;
            else v = parse_number(s, src, t.lines[r], t.header[c]);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    return m;
}

std::string summary_csv(const SummaryTable& table) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    std::string out = "quantity,label,t,median,lower,upper,level\n";
    for (const auto& r : table)
        out += quote(r.quantity) + "," + quote(r.label) + "," + format_double(r.t) + "," + format_double(r.median) +
               "," + format_double(r.lower) + "," + format_double(r.upper) + "," + format_double(r.level) + "\n";
    return out;
}

std::string summary_json(const SummaryTable& table) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table)
        rows.push_back({{"quantity", r.quantity},
                        {"label", r.label},
                        {"t", num(r.t)},
                        {"median", num(r.median)},
                        {"lower", num(r.lower)},
                        {"upper", num(r.upper)},
                        {"level", num(r.level)}});
    return rows.dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("error writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace hazspline
