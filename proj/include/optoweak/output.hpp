#pragma once
// CSV rows with fixed 17-significant-digit formatting, and a minimal SVG
// line plot.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace optoweak {

using Cell = std::variant<double, std::string>;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_cell(const Cell& c) {
    if (const double* d = std::get_if<double>(&c)) return format_double(*d);
    const std::string& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return header.size();
    }
    std::vector<double> numbers(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        for (const auto& r : rows) {
            const double* d = c < r.size() ? std::get_if<double>(&r[c]) : nullptr;
            out.push_back(d ? *d : kNaN);
        }
        return out;
    }
};

inline void write_csv_row(std::ostream& out, const std::vector<Cell>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << format_cell(row[i]);
    }
    out << '\n';
}

inline void write_csv_header(std::ostream& out, const std::vector<std::string>& header) {
    std::vector<Cell> cells(header.begin(), header.end());
    write_csv_row(out, cells);
}

inline void write_csv(std::ostream& out, const Table& t) {
    write_csv_header(out, t.header);
    for (const auto& r : t.rows) write_csv_row(out, r);
}

struct Series {
    std::string name;
    std::vector<double> y;
};

/// Polylines over a shared x axis; NaN points break the line. Axes carry
/// min/max tick labels, the legend sits top-right.
inline void write_svg(std::ostream& out, const std::string& title, const std::string& x_label,
                      const std::vector<double>& x, const std::vector<Series>& series) {
    constexpr double W = 720, H = 480, L = 70, R = 180, T = 40, B = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (double v : x) {
        if (std::isfinite(v)) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    }
    for (const auto& s : series) {
        for (double v : s.y) {
            if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
        }
    }
    if (!(xmax > xmin)) xmin -= 0.5, xmax = xmin + 1.0;
    if (!std::isfinite(ymin)) ymin = 0.0, ymax = 1.0;
    if (!(ymax > ymin)) ymin -= 0.5, ymax = ymin + 1.0;
    const auto px = [&](double v) { return L + (v - xmin) / (xmax - xmin) * (W - L - R); };
    const auto py = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };
    static const char* colors[] = {"black", "green", "blue", "red", "orange", "purple", "brown", "gray"};

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    const auto label = [&](double xx, double yy, const char* anchor, const std::string& text) {
        out << "<text x=\"" << xx << "\" y=\"" << yy << "\" text-anchor=\"" << anchor << "\" font-size=\"12\">" << text
            << "</text>\n";
    };
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", xmin);
    label(L, H - B + 16, "middle", buf);
    std::snprintf(buf, sizeof buf, "%.4g", xmax);
    label(W - R, H - B + 16, "middle", buf);
    std::snprintf(buf, sizeof buf, "%.4g", ymin);
    label(L - 6, H - B, "end", buf);
    std::snprintf(buf, sizeof buf, "%.4g", ymax);
    label(L - 6, T + 4, "end", buf);
    label((L + W - R) / 2, H - 12, "middle", x_label);

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = colors[s % std::size(colors)];
        std::string pts;
        const auto flush = [&] {
            if (!pts.empty()) {
                out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"" << pts
                    << "\"/>\n";
            }
            pts.clear();
        };
        for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i) {
            const double v = series[s].y[i];
            if (!std::isfinite(v) || !std::isfinite(x[i])) {
                flush();
                continue;
            }
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x[i]), py(v));
            pts += buf;
        }
        flush();
        const double ly = T + 16.0 * static_cast<double>(s);
        out << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        label(W - R + 36, ly + 4, "start", series[s].name);
    }
    out << "</svg>\n";
}

}  // namespace optoweak
