#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "fve/network.hpp"
#include "fve/train.hpp"

namespace fve {

// Tall/wide rectangles in an n x n image. Query "label"; inputs
// "pixel_<i>_<j>".
Network rectangle_model(int n);

// Seven-segment digits in an n x n image. Query "digit"; inputs
// "pixel_<i>_<j>".
Network digits_model(int n);

struct RandomNetSpec {
  int n = 10;       // nodes
  int k = 4;        // max parents
  double f = 0.5;   // functional fraction of non-root nodes
  std::uint64_t seed = 0;
};

// Variables V0..V{n-1} in topological order; no declared evidence.
Network random_network(const RandomNetSpec& spec);

// Segment boxes relative to the digit's upper-left corner, in the order
// top, top-left, top-right, middle, bottom-left, bottom-right, bottom.
struct SegmentBox {
  int row, col, height, width;
};
const std::array<SegmentBox, 7>& segment_boxes();
// Lit segments of a digit; segment s is bit (6 - s), so "top" is the high bit.
unsigned segment_mask(int digit);

enum class Split { train, test };

// All clean rectangles with their noisy copies (n per image for train, 2n
// for test).
Dataset rectangle_dataset(int n, Split split, std::uint64_t seed);
// All digit placements; 100 noisy copies per image for train, 200 for test,
// each flipping n background pixels.
Dataset digits_dataset(int n, Split split, std::uint64_t seed);

// Uniform sample without replacement; all rows when k >= size.
Dataset sample_rows(const Dataset& data, std::size_t k, std::uint64_t seed);

std::string pixel_name(int i, int j);

}  // namespace fve
