#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fve::detail {

// Row-major strides (last axis fastest).
inline std::vector<std::size_t> row_major_strides(std::span<const int> dims) {
  std::vector<std::size_t> strides(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) {
    strides[k - 1] = strides[k] * static_cast<std::size_t>(dims[k]);
  }
  return strides;
}

inline std::size_t element_count(std::span<const int> dims) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

// Walks every index of a row-major array with shape `dims` and reports, for
// each flat position, the offset `sum_k idx[k] * strides[k]` into another
// array. Strides of 0 broadcast.
template <typename Fn>
void for_each_offset(std::span<const int> dims, std::span<const std::size_t> strides,
                     Fn&& fn) {
  const std::size_t rank = dims.size();
  const std::size_t total = element_count(dims);
  if (rank == 0) {
    if (total) fn(std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<int> idx(rank, 0);
  std::size_t offset = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(flat, offset);
    for (std::size_t k = rank; k-- > 0;) {
      if (++idx[k] < dims[k]) {
        offset += strides[k];
        break;
      }
      offset -= strides[k] * static_cast<std::size_t>(dims[k] - 1);
      idx[k] = 0;
    }
  }
}

// Offset table form of for_each_offset, for kernels that replay the same
// gather many times.
inline std::vector<std::uint32_t> offset_table(std::span<const int> dims,
                                               std::span<const std::size_t> strides) {
  std::vector<std::uint32_t> table(element_count(dims));
  for_each_offset(dims, strides, [&](std::size_t flat, std::size_t off) {
    table[flat] = static_cast<std::uint32_t>(off);
  });
  return table;
}

}  // namespace fve::detail
