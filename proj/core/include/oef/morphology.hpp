#pragma once

#include "oef/image.hpp"

namespace oef {

// Topology-preserving thinning to one-pixel, 8-connected strokes: simple
// border pixels are peeled from the north, south, east and west in turn until
// nothing changes, then any remaining 2x2 block is broken. Stroke endpoints
// are kept. Nonzero pixels are foreground.
BinaryMap thin(BinaryMap mask);

// Sets background pixels whose four 4-neighbors are all foreground.
BinaryMap fill_pinholes(BinaryMap mask);

// Number of foreground runs in the 8-neighbor ring of (x, y) (crossing number).
// 1 at a line end, 2 inside a line, >= 3 at a junction.
int branch_count(const BinaryMap& mask, int x, int y);

int neighbor_count(const BinaryMap& mask, int x, int y);

bool has_2x2_block(const BinaryMap& mask);

struct DistanceField {
  ImageF distance;       // Euclidean distance to the nearest foreground pixel
  Image<Pixel> nearest;  // that pixel; (-1, -1) when the mask is empty
};

// Exact Euclidean distance transform (lower envelope of parabolas, two passes).
DistanceField distance_transform(const BinaryMap& mask);

}  // namespace oef
