#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "quantfolio/error.hpp"

namespace quantfolio::cli {

std::string json_string(const std::string& text) { return nlohmann::json(text).dump(); }

std::string json_number(double value) {
    if (!std::isfinite(value)) return "null";
    return format_number(value);
}

std::string weights_json(const std::vector<std::string>& assets, const Vector& weights) {
    std::string out = "{";
    for (std::size_t i = 0; i < assets.size(); ++i) {
        if (i > 0) out += ",";
        out += json_string(assets[i]) + ":" + json_number(weights[static_cast<Eigen::Index>(i)]);
    }
    return out + "}";
}

std::string series_csv(const ReturnSeries& series) {
    std::string out = "date,return\n";
    char buffer[40];
    for (Eigen::Index t = 0; t < series.size(); ++t) {
        out += series.dates.empty() ? std::to_string(t) : series.dates[static_cast<std::size_t>(t)].to_string();
        std::snprintf(buffer, sizeof buffer, ",%.17g\n", series.values[t]);
        out += buffer;
    }
    return out;
}

ReturnSeries read_series_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedCsv, "cannot open series file " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "date,return") {
        throw Error(ErrorCode::MalformedCsv, path.string() + ": expected header 'date,return'");
    }
    std::vector<double> values;
    std::vector<Date> dates;
    bool dated = true;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
            throw Error(ErrorCode::MalformedCsv, path.string() + ": row " + std::to_string(row) + " needs two fields");
        }
        const std::string key = line.substr(0, comma);
        const std::string cell = line.substr(comma + 1);
        if (key.find('-') != std::string::npos) {
            dates.push_back(Date::parse(key));
        } else {
            dated = false;
        }
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (cell.empty() || end != cell.c_str() + cell.size()) {
            throw Error(ErrorCode::MalformedCsv, path.string() + ": row " + std::to_string(row) + " has a bad number");
        }
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::MissingCell, path.string() + ": row " + std::to_string(row) + " is not finite");
        }
        values.push_back(v);
    }
    ReturnSeries out;
    out.values = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (dated) out.dates = std::move(dates);
    return out;
}

namespace {

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
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

std::string fixed(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", v);
    return buffer;
}

std::string tick(double v) {
    if (std::abs(v) < 1e-14) return "0";
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.4g", v);
    return buffer;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finish() {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        } else if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            const double pad = std::max(1e-6, 0.05 * std::abs(hi));
            lo -= pad;
            hi += pad;
        } else {
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
    }
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string render_svg(const Chart& chart) {
    constexpr double width = 760, height = 460;
    constexpr double left = 80, right = 190, top = 40, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    Range xr, yr;
    for (const auto& s : chart.series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    xr.finish();
    yr.finish();
    auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - yr.lo) / (yr.hi - yr.lo) * plot_h; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
        << "<text x=\"" << fixed(left + plot_w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << escape_xml(chart.title) << "</text>\n";

    // axes and ticks
    svg << "<g stroke=\"#333\" stroke-width=\"1\">\n"
        << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top + plot_h) << "\" x2=\"" << fixed(left + plot_w)
        << "\" y2=\"" << fixed(top + plot_h) << "\"/>\n"
        << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top) << "\" x2=\"" << fixed(left) << "\" y2=\""
        << fixed(top + plot_h) << "\"/>\n</g>\n";
    constexpr int ticks = 5;
    svg << "<g fill=\"#333\">\n";
    for (int i = 0; i <= ticks; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / ticks;
        const double fy = yr.lo + (yr.hi - yr.lo) * i / ticks;
        svg << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << fixed(top + plot_h + 18)
            << "\" text-anchor=\"middle\">" << tick(fx) << "</text>\n";
        svg << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(py(fy) + 4) << "\" text-anchor=\"end\">"
            << tick(fy) << "</text>\n";
    }
    svg << "<text x=\"" << fixed(left + plot_w / 2) << "\" y=\"" << fixed(height - 16) << "\" text-anchor=\"middle\">"
        << escape_xml(chart.x_label) << "</text>\n"
        << "<text x=\"18\" y=\"" << fixed(top + plot_h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << fixed(top + plot_h / 2) << ")\">" << escape_xml(chart.y_label) << "</text>\n</g>\n";

    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const auto& series = chart.series[s];
        const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        const auto n = std::min(series.x.size(), series.y.size());
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(series.x[i]) || !std::isfinite(series.y[i])) continue;
            svg << (first ? "" : " ") << fixed(px(series.x[i])) << ',' << fixed(py(series.y[i]));
            first = false;
        }
        svg << "\"/>\n";
        if (chart.markers) {
            svg << "<g fill=\"" << color << "\">\n";
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(series.x[i]) || !std::isfinite(series.y[i])) continue;
                svg << "<circle cx=\"" << fixed(px(series.x[i])) << "\" cy=\"" << fixed(py(series.y[i]))
                    << "\" r=\"2\"/>\n";
            }
            svg << "</g>\n";
        }
        const double ly = top + 10 + 18.0 * static_cast<double>(s);
        svg << "<line x1=\"" << fixed(left + plot_w + 16) << "\" y1=\"" << fixed(ly) << "\" x2=\""
            << fixed(left + plot_w + 40) << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << fixed(left + plot_w + 46) << "\" y=\"" << fixed(ly + 4) << "\">"
            << escape_xml(series.name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::InvalidConfig, "failed writing " + path.string());
}

}  // namespace quantfolio::cli
