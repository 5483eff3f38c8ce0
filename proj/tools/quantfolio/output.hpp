/**
 * @file output.hpp
 * @brief Deterministic report writers: JSON fragments, return-series CSV and
 * self-contained SVG line charts.
 *
 * Numbers in reports use format_number (12 significant digits); stored
 * series use 17 digits so they reload bit-exactly.
 */
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "quantfolio/portfolio.hpp"

namespace quantfolio::cli {

std::string json_string(const std::string& text);
std::string json_number(double value);

/// `{"<asset>":w,...}` in asset order.
std::string weights_json(const std::vector<std::string>& assets, const Vector& weights);

/// `date,return` rows; dates may be empty, in which case the row index is written.
std::string series_csv(const ReturnSeries& series);
/// Parses series_csv output. Throws MalformedCsv / MissingCell on bad or non-finite values.
ReturnSeries read_series_csv(const std::filesystem::path& path);

struct ChartSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool markers = false;
    std::vector<ChartSeries> series;
};

/// Axes, one polyline per series and a legend; no external references.
std::string render_svg(const Chart& chart);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace quantfolio::cli
