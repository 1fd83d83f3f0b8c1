#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ecgdx/attribution.hpp"

namespace ecgdx {

struct BeeswarmOptions {
  std::uint64_t seed = 0;
  std::string title;
};

// Empirical CDF of each cell within its feature column; NaN for missing.
std::vector<std::array<double, kNumFeatures>> value_percentiles(const AttributionMatrix& attr);

std::string beeswarm_csv(const AttributionMatrix& attr);
std::string beeswarm_svg(const AttributionMatrix& attr, const BeeswarmOptions& options);

// Writes <stem>.csv and <stem>.svg into `out_dir`.
void beeswarm_export(const AttributionMatrix& attr, const std::filesystem::path& out_dir,
                     const BeeswarmOptions& options, const std::string& stem = "beeswarm");

}  // namespace ecgdx
