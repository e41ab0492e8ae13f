#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

#include "uvac/tsne.hpp"

namespace uvac::viz {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

void write_scatter_svg(const std::string& path, const RowMatrix& coords, const Labels& labels,
                       const std::string& title) {
  if (coords.rows() != Eigen::Index(labels.size()) || coords.cols() != 2)
    throw std::invalid_argument("write_scatter_svg: need n x 2 coordinates and n labels");
  constexpr double width = 720, height = 600, margin = 40, legend = 110;
  const double plot_w = width - 2 * margin - legend;
  const double plot_h = height - 2 * margin;
  const double x_lo = coords.col(0).minCoeff(), x_hi = coords.col(0).maxCoeff();
  const double y_lo = coords.col(1).minCoeff(), y_hi = coords.col(1).maxCoeff();
  const double x_span = x_hi > x_lo ? x_hi - x_lo : 1.0;
  const double y_span = y_hi > y_lo ? y_hi - y_lo : 1.0;

  std::map<int, int> color_of;
  for (int l : labels) color_of.emplace(l, 0);
  int next = 0;
  for (auto& [label, color] : color_of) color = next++;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const double x = margin + (coords(i, 0) - x_lo) / x_span * plot_w;
    const double y = margin + (1.0 - (coords(i, 1) - y_lo) / y_span) * plot_h;
    const char* fill = kPalette[color_of[labels[std::size_t(i)]] % 10];
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\" fill-opacity=\"0.7\"/>\n", x,
                  y, fill);
    out << buf;
  }
  double ly = margin;
  for (const auto& [label, color] : color_of) {
    const double lx = width - margin - legend + 20;
    std::snprintf(buf, sizeof buf,
                  "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"5\" fill=\"%s\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"13\">cluster %d</text>\n",
                  lx, ly, kPalette[color % 10], lx + 12, ly + 4, label);
    out << buf;
    ly += 20;
  }
  out << "</svg>\n";
}

void write_coordinates(const std::string& path, const RowMatrix& coords, const Labels& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  char buf[96];
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %d\n", coords(i, 0), coords(i, 1), labels[std::size_t(i)]);
    out << buf;
  }
}

}  // namespace uvac::viz
