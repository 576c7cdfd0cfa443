#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "alphatest/empirical.hpp"
#include "alphatest/error.hpp"
#include "alphatest/mc_lab.hpp"
#include "alphatest/version.hpp"

namespace alphatest::report {

inline constexpr const char* kRejectionHeader = "test,design,N,T,a,rate,reps,B,seed";

inline void write_rejection_csv(std::ostream& out, const mc::RejectionReport& rep) {
    out << kRejectionHeader << '\n';
    for (const auto& r : rep.rows) {
        out << r.test << ',' << r.design << ',' << r.n_assets << ',' << r.n_periods << ','
            << (std::isnan(r.signal) ? std::string("null") : format_real(r.signal)) << ',' << format_real(r.rate)
            << ',' << r.replications << ',' << r.B << ',' << r.seed << '\n';
    }
}

/// Header lines are "# key=value", then the column row, then one line per window.
inline void write_report_csv(std::ostream& out, const ReportDocument& doc) {
    out << "# schema=" << kReportSchema << '\n';
    for (const auto& [k, v] : doc.header) out << "# " << k << '=' << v << '\n';
    out << "window_end,N_used";
    for (const auto& c : doc.columns) out << ',' << c;
    out << '\n';
    for (const auto& row : doc.rows) {
        out << row.window_end << ',' << row.n_used;
        for (double p : row.p_values) out << ',' << format_real(p);
        out << '\n';
    }
}

/// Reads the "# key=value" header of a report written above.
inline std::map<std::string, std::string> read_report_header(std::istream& in) {
    std::map<std::string, std::string> h;
    std::string line;
    while (std::getline(in, line) && line.rfind("# ", 0) == 0) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) h[line.substr(2, eq - 2)] = line.substr(eq + 1);
    }
    return h;
}

template <class Writer, class Doc>
void write_file(const std::string& path, const Doc& doc, Writer writer) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path);
    writer(out, doc);
    if (!out) fail(ErrorCode::IoError, "write to " + path + " failed");
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Power curves: rejection rate against signal a, one polyline per test.
inline void write_power_svg(std::ostream& out, const mc::RejectionReport& rep, const std::string& title = {}) {
    std::vector<std::string> tests;
    double a_min = std::numeric_limits<double>::infinity();
    double a_max = -std::numeric_limits<double>::infinity();
    for (const auto& r : rep.rows) {
        if (std::find(tests.begin(), tests.end(), r.test) == tests.end()) tests.push_back(r.test);
        if (!std::isnan(r.signal)) {
            a_min = std::min(a_min, r.signal);
            a_max = std::max(a_max, r.signal);
        }
    }
    if (!std::isfinite(a_min)) a_min = 0.0, a_max = 1.0;
    if (a_max == a_min) a_max = a_min + 1.0;

    constexpr double width = 640, height = 400, left = 60, right = 140, top = 40, bottom = 50;
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto px = [&](double a) { return left + (a - a_min) / (a_max - a_min) * pw; };
    auto py = [&](double rate) { return top + (1.0 - rate) * ph; };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                    "#7f7f7f", "#bcbd22", "#17becf"};
    char buf[256];

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) out << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                  left, top, pw, ph);
    out << buf;
    for (int i = 0; i <= 4; ++i) {
        const double rate = i / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"#ddd\"/>"
                      "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%g</text>\n",
                      left, py(rate), left + pw, py(rate), left - 6, py(rate) + 4, rate);
        out << buf;
    }
    std::set<double> ticks;
    for (const auto& r : rep.rows)
        if (!std::isnan(r.signal)) ticks.insert(r.signal);
    for (double a : ticks) {
        std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%g</text>\n", px(a),
                      top + ph + 18, a);
        out << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">signal a</text>"
                  "<text x=\"16\" y=\"%g\" transform=\"rotate(-90 16 %g)\" text-anchor=\"middle\">rejection rate</text>\n",
                  left + pw / 2, height - 10, top + ph / 2, top + ph / 2);
    out << buf;

    for (std::size_t k = 0; k < tests.size(); ++k) {
        const char* colour = palette[k % (sizeof palette / sizeof *palette)];
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : rep.rows)
            if (r.test == tests[k] && !std::isnan(r.signal)) pts.emplace_back(r.signal, r.rate);
        std::sort(pts.begin(), pts.end());
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (const auto& [a, rate] : pts) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(a), py(rate));
            out << buf;
        }
        out << "\"/>\n";
        for (const auto& [a, rate] : pts) {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(a), py(rate),
                          colour);
            out << buf;
        }
        const double ly = top + 10 + 18.0 * static_cast<double>(k);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" stroke-width=\"2\"/>"
                      "<text x=\"%g\" y=\"%g\">",
                      left + pw + 12, ly, left + pw + 32, ly, colour, left + pw + 38, ly + 4);
        out << buf << tests[k] << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace alphatest::report
