#pragma once

#include "endo/imgcore/raster.hpp"

#include <functional>

namespace endo::img {

/// Raster-scan connected-component labeling of foreground pixels.
/// Labels are contiguous from 1 in order of first encounter; 0 is background.
LabelMap connected_components(const BinaryMask& mask, int connectivity);

/// Chebyshev (square) dilation. Radius 0 is the identity.
BinaryMask dilate(const BinaryMask& mask, int radius);

/// Number of foreground 8-neighbors of (x, y); out-of-raster counts as background.
int foreground_neighbors(const BinaryMask& mask, int x, int y);

/// A foreground pixel is simple when deleting it changes neither the
/// 8-connectivity of the foreground nor the 4-connectivity of the background
/// within its 3x3 neighborhood.
bool is_simple(const BinaryMask& mask, int x, int y);

/// Sequential topology-preserving thinning: repeatedly removes simple pixels
/// that are not line ends, in raster order, until none remain. The result is
/// a set of 8-connected curves of 1 pixel width whose complement keeps its
/// 4-connected components. `may_remove`, when given, is called immediately
/// before each deletion and may veto it by returning false.
BinaryMask thin(const BinaryMask& mask, const std::function<bool(int, int)>& may_remove = {});

}  // namespace endo::img
