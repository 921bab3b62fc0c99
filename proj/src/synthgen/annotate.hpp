#pragma once

#include "endo/synthgen/synthgen.hpp"

namespace endo::synth::detail {

/// Fills the annotation raster and the full-cell list from cells_map and
/// status. Without polygons, vertex lists of surviving cells are kept.
void annotate(GoldStandard& gold, const std::vector<CellPolygon>* polygons = nullptr,
              const std::vector<int>* seed_of_cell = nullptr);

}  // namespace endo::synth::detail
