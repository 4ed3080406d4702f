#include "ddss/svg.hpp"

#include <cstdio>

#include "ddss/csv.hpp"
#include "ddss/errors.hpp"

namespace ddss {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_scatter_svg(const std::string& path, const std::vector<ScatterPanel>& panels,
                       std::uint64_t config_hash, double extent) {
  if (panels.empty()) throw UsageError("plot: nothing to draw");
  if (!(extent > 0.0)) throw DomainError("plot: extent must be positive");
  const int side = 300, margin = 24, title_h = 22;
  const std::size_t per_row = panels.size() < 4 ? panels.size() : 4;
  const std::size_t rows = (panels.size() + per_row - 1) / per_row;
  const int cell_w = side + margin, cell_h = side + margin + title_h;
  const int width = int(per_row) * cell_w + margin;
  const int height = int(rows) * cell_h + margin;

  std::string out;
  char head[256];
  std::snprintf(head, sizeof head,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "viewBox=\"0 0 %d %d\">\n",
                width, height, width, height);
  out += head;
  char tag[64];
  std::snprintf(tag, sizeof tag, "<!-- config %016llx -->\n",
                static_cast<unsigned long long>(config_hash));
  out += tag;
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    if (!panel.points.defined() || panel.points.rank() != 2 || panel.points.cols() != 2)
      throw ShapeError("plot: panel '" + panel.title + "' needs [n x 2] points");
    const int x0 = margin + int(p % per_row) * cell_w;
    const int y0 = margin + int(p / per_row) * cell_h;
    out += "<text x=\"" + num(x0 + side / 2.0) + "\" y=\"" + num(y0 + 14) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           panel.title + "</text>\n";
    const int py = y0 + title_h;
    out += "<rect x=\"" + std::to_string(x0) + "\" y=\"" + std::to_string(py) + "\" width=\"" +
           std::to_string(side) + "\" height=\"" + std::to_string(side) +
           "\" fill=\"none\" stroke=\"#888\"/>\n";
    // axes through the origin
    out += "<line x1=\"" + num(x0 + side / 2.0) + "\" y1=\"" + std::to_string(py) + "\" x2=\"" +
           num(x0 + side / 2.0) + "\" y2=\"" + std::to_string(py + side) +
           "\" stroke=\"#ddd\"/>\n";
    out += "<line x1=\"" + std::to_string(x0) + "\" y1=\"" + num(py + side / 2.0) + "\" x2=\"" +
           std::to_string(x0 + side) + "\" y2=\"" + num(py + side / 2.0) +
           "\" stroke=\"#ddd\"/>\n";
    const double* pts = panel.points.data();
    const std::size_t n = panel.points.rows();
    for (std::size_t i = 0; i < n; ++i) {
      const double ux = (pts[2 * i] + extent) / (2.0 * extent);
      const double uy = (pts[2 * i + 1] + extent) / (2.0 * extent);
      if (ux < 0.0 || ux > 1.0 || uy < 0.0 || uy > 1.0) continue;  // off-panel
      out += "<circle cx=\"" + num(x0 + ux * side) + "\" cy=\"" + num(py + (1.0 - uy) * side) +
             "\" r=\"1.8\" fill=\"#33699c\" fill-opacity=\"0.55\"/>\n";
    }
  }
  out += "</svg>\n";
  write_text_file(path, out);
}

}  // namespace ddss
