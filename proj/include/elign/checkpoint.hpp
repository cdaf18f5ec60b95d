#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "elign/nn.hpp"

namespace elign::nn {

// On-disk network file:
//
//   bytes 0..7   magic "ELGNNET1"
//   bytes 8..15  header length H, unsigned 64-bit little-endian
//   next H bytes UTF-8 JSON header:
//                  {"layer_sizes": [...], "hidden_activation": "relu",
//                   "output_activation": "...", "shapes": [[out,in], ...],
//                   "has_optimizer": bool, "optimizer": {...}}
//   remainder    float64 little-endian values: for each layer W (row-major)
//                then b; when has_optimizer, the same sequence again for the
//                first moment, then for the second moment.
//
// Round trip is bit-exact.
struct NetworkFile {
  MlpSpec spec;
  MlpParams params;
  std::optional<AdamState> optimizer;
};

void write_network(std::ostream& out, const NetworkFile& file);
NetworkFile read_network(std::istream& in);

void save_network(const std::filesystem::path& path, const NetworkFile& file);
NetworkFile load_network(const std::filesystem::path& path);

}  // namespace elign::nn
