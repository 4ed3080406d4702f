#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ddss/tensor.hpp"

namespace ddss {

struct ScatterPanel {
  std::string title;
  tg::Tensor points;  // [n x 2]
};

// Self-contained scatter grid; the generating config hash rides along as a
// comment so plots stay traceable to their run.
void write_scatter_svg(const std::string& path, const std::vector<ScatterPanel>& panels,
                       std::uint64_t config_hash, double extent = 6.0);

}  // namespace ddss
