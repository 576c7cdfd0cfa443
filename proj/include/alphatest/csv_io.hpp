#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "alphatest/error.hpp"
#include "alphatest/linalg.hpp"
#include "alphatest/model.hpp"

namespace alphatest::io {

/// A parsed CSV file: header plus rows of raw cells.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<Index>(j);
        fail(ErrorCode::ParseError, path + ": no column named '" + name + "'");
    }
};

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Splits one record on commas; double quotes group a field and "" escapes a quote.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline CsvTable parse_csv(std::istream& in, const std::string& name = "<stream>") {
    CsvTable t;
    t.path = name;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size()) {
            fail(ErrorCode::ParseError, name + ": line " + std::to_string(line_no) + " has " +
                                            std::to_string(cells.size()) + " fields, header has " +
                                            std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (!have_header) fail(ErrorCode::ParseError, name + ": missing header row");
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path);
    return parse_csv(in, path);
}

inline bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." || cell == "null";
}

/// Decimal parse; missing markers map to NaN, anything else unparseable is a ParseError.
inline double parse_number(const std::string& cell, const CsvTable& t, std::size_t row, std::size_t col) {
    if (is_missing(cell)) return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (...) {
        used = 0;
    }
    if (used != cell.size() || !std::isfinite(v)) {
        fail(ErrorCode::ParseError, t.path + ": row " + std::to_string(row + 1) + ", column " +
                                        std::to_string(col + 1) + " ('" + t.header[col] +
                                        "'): not a number: '" + cell + "'");
    }
    return v;
}

struct DataSetManifest {
    std::string returns_path;
    std::string factors_path;
    std::optional<std::string> riskfree_path;
    std::string date_column = "date";
    std::string frequency = "monthly";
    std::vector<std::string> factor_columns;  // empty: every non-date column
    std::string riskfree_column;              // empty: the single non-date column
    std::vector<std::string> subtract_riskfree_from;  // factor columns that are not already excess
};

/// Full sample with missing returns kept as NaN, so windows can choose assets.
struct RawData {
    std::vector<std::string> dates;
    std::vector<std::string> asset_ids;
    std::vector<std::string> factor_ids;
    Matrix returns;  // N x T, NaN marks a missing observation
    Matrix factors;  // r x T
};

namespace detail {

inline std::vector<std::string> dates_of(const CsvTable& t, Index date_col) {
    std::vector<std::string> d;
    d.reserve(t.rows.size());
    for (const auto& row : t.rows) d.push_back(row[static_cast<std::size_t>(date_col)]);
    return d;
}

inline void check_alignment(const std::vector<std::string>& a, const std::string& a_name,
                            const std::vector<std::string>& b, const std::string& b_name) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] != b[i]) {
            fail(ErrorCode::AlignmentError, "dates differ at row " + std::to_string(i + 1) + ": " + a_name + " has '" +
                                                a[i] + "', " + b_name + " has '" + b[i] + "'");
        }
    }
    if (a.size() != b.size()) {
        fail(ErrorCode::AlignmentError, a_name + " has " + std::to_string(a.size()) + " dates, " + b_name + " has " +
                                            std::to_string(b.size()) + "; first unmatched row " +
                                            std::to_string(n + 1));
    }
}

}  // namespace detail

inline RawData load(const CsvTable& returns, const CsvTable& factors, const std::optional<CsvTable>& riskfree,
                    const DataSetManifest& m) {
    const Index rdate = returns.column(m.date_column);
    const Index fdate = factors.column(m.date_column);
    RawData raw;
    raw.dates = detail::dates_of(returns, rdate);
    detail::check_alignment(raw.dates, returns.path, detail::dates_of(factors, fdate), factors.path);
    const auto t = static_cast<Index>(raw.dates.size());

    std::vector<Index> fcols;
    if (m.factor_columns.empty()) {
        for (std::size_t j = 0; j < factors.header.size(); ++j)
            if (static_cast<Index>(j) != fdate) fcols.push_back(static_cast<Index>(j));
    } else {
        for (const auto& name : m.factor_columns) fcols.push_back(factors.column(name));
    }
    for (Index c : fcols) raw.factor_ids.push_back(factors.header[static_cast<std::size_t>(c)]);

    raw.factors.resize(static_cast<Index>(fcols.size()), t);
    for (Index s = 0; s < t; ++s) {
        for (std::size_t j = 0; j < fcols.size(); ++j) {
            const auto c = static_cast<std::size_t>(fcols[j]);
            const double v = parse_number(factors.rows[static_cast<std::size_t>(s)][c], factors,
                                          static_cast<std::size_t>(s) + 1, c);
            if (std::isnan(v)) {
                fail(ErrorCode::InvalidData, factors.path + ": factor '" + factors.header[c] + "' is missing at row " +
                                                 std::to_string(s + 2));
            }
            raw.factors(static_cast<Index>(j), s) = v;
        }
    }

    std::vector<Index> acols;
    for (std::size_t j = 0; j < returns.header.size(); ++j) {
        if (static_cast<Index>(j) == rdate) continue;
        acols.push_back(static_cast<Index>(j));
        raw.asset_ids.push_back(returns.header[j]);
    }
    raw.returns.resize(static_cast<Index>(acols.size()), t);
    for (Index s = 0; s < t; ++s) {
        for (std::size_t i = 0; i < acols.size(); ++i) {
            const auto c = static_cast<std::size_t>(acols[i]);
            raw.returns(static_cast<Index>(i), s) = parse_number(returns.rows[static_cast<std::size_t>(s)][c], returns,
                                                                 static_cast<std::size_t>(s) + 1, c);
        }
    }

    if (riskfree) {
        const Index date_col = riskfree->column(m.date_column);
        detail::check_alignment(raw.dates, returns.path, detail::dates_of(*riskfree, date_col), riskfree->path);
        Index rf_col = -1;
        if (!m.riskfree_column.empty()) {
            rf_col = riskfree->column(m.riskfree_column);
        } else {
            if (riskfree->header.size() != 2) {
                fail(ErrorCode::ParseError, riskfree->path + ": name the risk-free column when the file has several");
            }
            rf_col = date_col == 0 ? 1 : 0;
        }
        for (Index s = 0; s < t; ++s) {
            const auto c = static_cast<std::size_t>(rf_col);
            const double rf = parse_number(riskfree->rows[static_cast<std::size_t>(s)][c], *riskfree,
                                           static_cast<std::size_t>(s) + 1, c);
            if (std::isnan(rf)) fail(ErrorCode::InvalidData, riskfree->path + ": missing risk-free rate");
            raw.returns.col(s).array() -= rf;
            for (const auto& name : m.subtract_riskfree_from) {
                for (std::size_t j = 0; j < raw.factor_ids.size(); ++j)
                    if (raw.factor_ids[j] == name) raw.factors(static_cast<Index>(j), s) -= rf;
            }
        }
    }
    return raw;
}

inline RawData load(const DataSetManifest& m) {
    std::optional<CsvTable> rf;
    if (m.riskfree_path) rf = read_csv(*m.riskfree_path);
    return load(read_csv(m.returns_path), read_csv(m.factors_path), rf, m);
}

/// Periods [begin, end) with every asset that is complete there; others are
/// dropped with a warning naming them.
inline PanelData window_panel(const RawData& raw, Index begin, Index end, bool quiet = false) {
    if (begin < 0 || end > raw.returns.cols() || begin >= end) fail(ErrorCode::InvalidArgument, "bad window");
    const Index len = end - begin;
    std::vector<Index> keep;
    for (Index i = 0; i < raw.returns.rows(); ++i) {
        if (raw.returns.row(i).segment(begin, len).array().isNaN().any()) {
            if (!quiet) warn("asset '" + raw.asset_ids[static_cast<std::size_t>(i)] + "' has missing values; excluded");
        } else {
            keep.push_back(i);
        }
    }
    PanelData p;
    p.returns.resize(static_cast<Index>(keep.size()), len);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        p.returns.row(static_cast<Index>(k)) = raw.returns.row(keep[k]).segment(begin, len);
        p.asset_ids.push_back(raw.asset_ids[static_cast<std::size_t>(keep[k])]);
    }
    p.factors = raw.factors.middleCols(begin, len);
    p.period_ids.assign(raw.dates.begin() + begin, raw.dates.begin() + end);
    return p;
}

/// Whole sample as a validated panel.
inline PanelData ingest(const DataSetManifest& m) {
    const RawData raw = load(m);
    PanelData p = window_panel(raw, 0, raw.returns.cols());
    validate(p);
    return p;
}

}  // namespace alphatest::io
