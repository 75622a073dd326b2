#include "hierts/emit.hpp"

#include "hierts/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hierts {

std::string format_double(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw NumericalFailure("format_double: conversion failed");
  return std::string(buffer, ptr);
}

std::string curves_to_csv(const std::vector<AggregateCurve>& curves) {
  if (curves.empty()) throw ValidationError("emit: no curves to serialize");
  const std::size_t rounds = curves.front().mean.size();
  for (const auto& curve : curves)
    if (curve.mean.size() != rounds)
      throw DimensionMismatch("emit: curves disagree on horizon");
  std::string out = "round,agent,mean_cum_regret,stderr\n";
  for (std::size_t t = 0; t < rounds; ++t) {
    for (const auto& curve : curves) {
      out += std::to_string(t + 1);
      out += ',';
      out += curve.agent;
      out += ',';
      out += format_double(curve.mean[t]);
      out += ',';
      out += format_double(curve.stderr_[t]);
      out += '\n';
    }
  }
  return out;
}

std::vector<AggregateCurve> curves_from_csv(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line) || line != "round,agent,mean_cum_regret,stderr")
    throw FormatError(1, "csv: unexpected header");
  std::vector<AggregateCurve> curves;
  auto find_curve = [&curves](const std::string& agent) -> AggregateCurve& {
    for (auto& c : curves)
      if (c.agent == agent) return c;
    curves.push_back(AggregateCurve{agent, {}, {}, 0, 0.0});
    return curves.back();
  };
  int line_number = 1;
  while (std::getline(stream, line)) {
    ++line_number;
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string round_s, agent, mean_s, stderr_s;
    if (!std::getline(fields, round_s, ',') || !std::getline(fields, agent, ',') ||
        !std::getline(fields, mean_s, ',') || !std::getline(fields, stderr_s))
      throw FormatError(line_number, "csv: malformed row");
    AggregateCurve& curve = find_curve(agent);
    curve.mean.push_back(std::stod(mean_s));
    curve.stderr_.push_back(std::stod(stderr_s));
  }
  return curves;
}

std::uint64_t config_hash(const std::string& raw_text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char byte : raw_text) {
    hash ^= byte;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf"};

struct ChartScale {
  double x_min, x_max, y_min, y_max;
  double width = 840.0, height = 520.0;
  double margin_left = 70.0, margin_right = 170.0, margin_top = 30.0, margin_bottom = 50.0;

  double sx(double x) const {
    return margin_left + (x - x_min) / (x_max - x_min) * (width - margin_left - margin_right);
  }
  double sy(double y) const {
    return height - margin_bottom -
           (y - y_min) / (y_max - y_min) * (height - margin_top - margin_bottom);
  }
};

}  // namespace

std::string curves_to_svg(const std::vector<AggregateCurve>& curves) {
  if (curves.empty()) throw ValidationError("svg: no curves");
  const std::size_t rounds = curves.front().mean.size();
  ChartScale scale{1.0, static_cast<double>(rounds), 0.0, 1.0};
  for (const auto& curve : curves)
    for (std::size_t t = 0; t < curve.mean.size(); ++t)
      scale.y_max = std::max(scale.y_max, curve.mean[t] + curve.stderr_[t]);
  if (scale.y_max <= scale.y_min) scale.y_max = scale.y_min + 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << scale.width
      << "\" height=\"" << scale.height << "\" viewBox=\"0 0 " << scale.width << " "
      << scale.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axes.
  svg << "<line x1=\"" << scale.sx(scale.x_min) << "\" y1=\"" << scale.sy(scale.y_min)
      << "\" x2=\"" << scale.sx(scale.x_max) << "\" y2=\"" << scale.sy(scale.y_min)
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << scale.sx(scale.x_min) << "\" y1=\"" << scale.sy(scale.y_min)
      << "\" x2=\"" << scale.sx(scale.x_min) << "\" y2=\"" << scale.sy(scale.y_max)
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 5; ++tick) {
    const double x = scale.x_min + (scale.x_max - scale.x_min) * tick / 5.0;
    const double y = scale.y_min + (scale.y_max - scale.y_min) * tick / 5.0;
    svg << "<text x=\"" << scale.sx(x) << "\" y=\"" << scale.sy(scale.y_min) + 20.0
        << "\" font-size=\"12\" text-anchor=\"middle\">" << static_cast<long long>(x)
        << "</text>\n";
    svg << "<text x=\"" << scale.sx(scale.x_min) - 8.0 << "\" y=\"" << scale.sy(y) + 4.0
        << "\" font-size=\"12\" text-anchor=\"end\">" << format_double(std::round(y * 100.0) / 100.0)
        << "</text>\n";
  }
  svg << "<text x=\"" << (scale.sx(scale.x_min) + scale.sx(scale.x_max)) / 2.0 << "\" y=\""
      << scale.height - 10.0 << "\" font-size=\"13\" text-anchor=\"middle\">round</text>\n";
  svg << "<text x=\"18\" y=\"" << (scale.sy(scale.y_min) + scale.sy(scale.y_max)) / 2.0
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (scale.sy(scale.y_min) + scale.sy(scale.y_max)) / 2.0
      << ")\">mean cumulative regret</text>\n";

  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c];
    const char* color = kPalette[c % (sizeof(kPalette) / sizeof(kPalette[0]))];

    // stderr band as a closed polygon: upper path forward, lower path back.
    std::ostringstream band;
    for (std::size_t t = 0; t < curve.mean.size(); ++t)
      band << scale.sx(static_cast<double>(t + 1)) << ','
           << scale.sy(curve.mean[t] + curve.stderr_[t]) << ' ';
    for (std::size_t t = curve.mean.size(); t-- > 0;)
      band << scale.sx(static_cast<double>(t + 1)) << ','
           << scale.sy(std::max(0.0, curve.mean[t] - curve.stderr_[t])) << ' ';
    svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color
        << "\" opacity=\"0.15\" stroke=\"none\"/>\n";

    std::ostringstream path;
    for (std::size_t t = 0; t < curve.mean.size(); ++t)
      path << scale.sx(static_cast<double>(t + 1)) << ',' << scale.sy(curve.mean[t]) << ' ';
    svg << "<polyline points=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\"/>\n";

    const double ly = scale.margin_top + 18.0 * static_cast<double>(c);
    svg << "<rect x=\"" << scale.width - scale.margin_right + 14.0 << "\" y=\"" << ly
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << scale.width - scale.margin_right + 32.0 << "\" y=\"" << ly + 10.0
        << "\" font-size=\"12\">" << curve.agent << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> emit_results(const std::vector<AggregateCurve>& curves,
                                      const ExperimentConfig& config,
                                      const std::string& path_prefix) {
  if (curves.empty()) throw ValidationError("emit: no curves");
  const std::filesystem::path prefix(path_prefix);
  if (prefix.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(prefix.parent_path(), ec);
    if (ec) throw IoError("emit: cannot create output directory: " + ec.message());
  }

  std::vector<std::string> written;
  const std::string csv_path = path_prefix + ".csv";
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("emit: cannot write " + csv_path);
    out << curves_to_csv(curves);
    if (!out) throw IoError("emit: failed while writing " + csv_path);
  }
  written.push_back(csv_path);

  const std::string manifest_path = path_prefix + "_manifest.txt";
  {
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw IoError("emit: cannot write " + manifest_path);
    out << "code_version " << kCodeVersion << "\n";
    out << "config_hash " << config_hash(config.raw_text) << "\n";
    out << "base_seed " << config.base_seed << "\n";
    out << "horizon " << config.horizon << "\n";
    out << "runs " << config.runs << "\n";
    out << "agents";
    for (const auto& curve : curves) out << ' ' << curve.agent;
    out << "\n";
    if (!out) throw IoError("emit: failed while writing " + manifest_path);
  }
  written.push_back(manifest_path);

  if (config.svg) {
    const std::string svg_path = path_prefix + ".svg";
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw IoError("emit: cannot write " + svg_path);
    out << curves_to_svg(curves);
    if (!out) throw IoError("emit: failed while writing " + svg_path);
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace hierts
