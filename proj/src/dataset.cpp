#include "ddss/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ddss/errors.hpp"

namespace ddss {

Mixture eight_gaussians(double radius, double sigma) {
  Mixture m;
  m.dim = 2;
  m.sigma = sigma;
  m.centers.resize(16);
  for (std::size_t k = 0; k < 8; ++k) {
    const double th = 2.0 * M_PI * static_cast<double>(k) / 8.0;
    m.centers[2 * k] = radius * std::cos(th);
    m.centers[2 * k + 1] = radius * std::sin(th);
  }
  return m;
}

tg::Tensor sample_mixture(const Mixture& mix, std::size_t n, const NoiseStream& rng,
                          std::uint64_t block) {
  const std::size_t m = mix.n_modes();
  const std::size_t d = mix.dim;
  if (m == 0) throw DomainError("sample_mixture: empty mixture");
  tg::Tensor out = tg::Tensor::zeros({n, d});
  double* p = out.mut();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.bits(NoiseStream::pick, block, i) % m;
    for (std::size_t j = 0; j < d; ++j)
      p[i * d + j] = mix.centers[k * d + j] +
                     mix.sigma * rng.gaussian(NoiseStream::data, block, i * d + j);
  }
  return out;
}

tg::Tensor load_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "': empty file");
  std::vector<double> vals;
  std::size_t cols = 0, rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("'" + path + "': non-numeric cell '" + cell + "' at row " +
                      std::to_string(rows + 2));
      }
      ++c;
    }
    if (cols == 0) cols = c;
    if (c != cols) throw IoError("'" + path + "': ragged row " + std::to_string(rows + 2));
    ++rows;
  }
  if (rows == 0 || cols == 0) throw IoError("'" + path + "': no data rows");
  tg::Tensor out = tg::Tensor::zeros({rows, cols});
  std::copy(vals.begin(), vals.end(), out.mut());
  return out;
}

void save_points_csv(const std::string& path, const tg::Tensor& pts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  const std::size_t n = pts.rows(), d = pts.cols();
  for (std::size_t j = 0; j < d; ++j) out << (j ? ",x" : "x") << j;
  out << "\n";
  char buf[40];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", pts.data()[i * d + j]);
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace ddss
