#include "fve/studies.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "fve/error.hpp"

namespace fve {

namespace {

std::string indexed(const std::string& base, int i) { return base + "_" + std::to_string(i); }

// Builds a functional CPT from f(parent values) -> child value.
template <typename Fn>
std::vector<double> function_table(const std::vector<int>& parent_cards, int child_card, Fn&& fn) {
  std::size_t rows = 1;
  for (int c : parent_cards) rows *= static_cast<std::size_t>(c);
  std::vector<double> values(rows * static_cast<std::size_t>(child_card), 0.0);
  std::vector<int> u(parent_cards.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    values[r * static_cast<std::size_t>(child_card) + static_cast<std::size_t>(fn(u))] = 1.0;
    for (std::size_t k = u.size(); k-- > 0;) {
      if (++u[k] < parent_cards[k]) break;
      u[k] = 0;
    }
  }
  return values;
}

Cpt make_cpt(const Network& net, const std::string& child, const std::vector<std::string>& parents,
             std::vector<double> values, bool functional) {
  Cpt c;
  c.child = net.id(child);
  for (const auto& p : parents) c.parents.push_back(net.id(p));
  c.values = std::move(values);
  c.functional = functional;
  return c;
}

std::vector<double> uniform_over(int card, int lo, int hi) {
  std::vector<double> row(static_cast<std::size_t>(card), 0.0);
  for (int v = lo; v <= hi; ++v) row[static_cast<std::size_t>(v)] = 1.0 / (hi - lo + 1);
  return row;
}

std::vector<double> noisy_or_pixel(int parents) {
  // Pixel on with 0.9 when any parent is on, 0.1 otherwise.
  std::vector<double> values;
  for (int u = 0; u < (1 << parents); ++u) {
    const double on = u ? 0.9 : 0.1;
    values.push_back(1.0 - on);
    values.push_back(on);
  }
  return values;
}

void set_pixel_evidence(Network& net, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) net.evidence.push_back(net.id(pixel_name(i, j)));
  }
}

struct Image {
  std::vector<int> pixels;  // row-major n*n, 0/1
  int label;
};

Dataset noisy_dataset(int n, const std::vector<Image>& clean, int copies,
                      const std::function<int(const Image&)>& flips, std::uint64_t seed,
                      const std::string& label) {
  Dataset data;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) data.columns.push_back(pixel_name(i, j));
  }
  data.label = label;
  std::mt19937_64 rng(seed);
  for (const Image& img : clean) {
    std::vector<int> background;
    for (int p = 0; p < n * n; ++p) {
      if (!img.pixels[static_cast<std::size_t>(p)]) background.push_back(p);
    }
    const int k = flips(img);
    for (int c = 0; c < copies; ++c) {
      auto pool = background;
      std::vector<int> row = img.pixels;
      for (int t = 0; t < k; ++t) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(t), pool.size() - 1);
        std::swap(pool[static_cast<std::size_t>(t)], pool[pick(rng)]);
        row[static_cast<std::size_t>(pool[static_cast<std::size_t>(t)])] = 1;
      }
      data.rows.push_back(std::move(row));
      data.labels.push_back(img.label);
    }
  }
  return data;
}

}  // namespace

std::string pixel_name(int i, int j) { return "pixel_" + std::to_string(i) + "_" + std::to_string(j); }

Network rectangle_model(int n) {
  if (n < 4) throw ValidationError("rectangle model needs n >= 4");
  Network net;
  net.add_variable("label", 2);  // 0 tall, 1 wide
  net.add_variable("height", n);  // value v: height v+1
  net.add_variable("width", n);
  net.add_variable("row", n);
  net.add_variable("col", n);
  for (int i = 0; i < n; ++i) net.add_variable(indexed("row", i), 2);
  for (int j = 0; j < n; ++j) net.add_variable(indexed("col", j), 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) net.add_variable(pixel_name(i, j), 2);
  }

  net.set_cpt(make_cpt(net, "label", {}, {0.5, 0.5}, false));
  std::vector<double> height;
  for (int label = 0; label < 2; ++label) {
    // Tall needs a narrower width below it, wide a wider one above.
    const auto row = label == 0 ? uniform_over(n, 1, n - 1) : uniform_over(n, 0, n - 2);
    height.insert(height.end(), row.begin(), row.end());
  }
  net.set_cpt(make_cpt(net, "height", {"label"}, height, false));
  std::vector<double> width;
  for (int label = 0; label < 2; ++label) {
    for (int h = 0; h < n; ++h) {
      std::vector<double> row;
      if (label == 0) {
        row = h > 0 ? uniform_over(n, 0, h - 1) : uniform_over(n, 0, n - 1);
      } else {
        row = h < n - 1 ? uniform_over(n, h + 1, n - 1) : uniform_over(n, 0, n - 1);
      }
      width.insert(width.end(), row.begin(), row.end());
    }
  }
  net.set_cpt(make_cpt(net, "width", {"label", "height"}, width, false));
  for (const auto& [pos, size] : {std::pair{"row", "height"}, std::pair{"col", "width"}}) {
    std::vector<double> table;
    for (int s = 0; s < n; ++s) {
      const auto row = uniform_over(n, 0, n - s - 1);
      table.insert(table.end(), row.begin(), row.end());
    }
    net.set_cpt(make_cpt(net, pos, {size}, table, false));
    for (int i = 0; i < n; ++i) {
      auto on = function_table({n, n}, 2, [i](const std::vector<int>& u) {
        return u[0] <= i && i < u[0] + u[1] + 1 ? 1 : 0;
      });
      net.set_cpt(make_cpt(net, indexed(pos, i), {pos, size}, std::move(on), true));
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Cpt c = make_cpt(net, pixel_name(i, j), {indexed("row", i), indexed("col", j)},
                       {0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.1, 0.9}, false);
      c.tie_group = "pixel";
      net.set_cpt(std::move(c));
    }
  }
  set_pixel_evidence(net, n);
  net.validate();
  return net;
}

const std::array<SegmentBox, 7>& segment_boxes() {
  static const std::array<SegmentBox, 7> boxes{{
      {0, 1, 1, 2},  // top
      {1, 0, 2, 1},  // top-left
      {1, 3, 2, 1},  // top-right
      {3, 1, 1, 2},  // middle
      {4, 0, 2, 1},  // bottom-left
      {4, 3, 2, 1},  // bottom-right
      {6, 1, 1, 2},  // bottom
  }};
  return boxes;
}

unsigned segment_mask(int digit) {
  // Bits follow segment_boxes(): top, tl, tr, mid, bl, br, bottom.
  static const unsigned masks[10] = {
      0b1110111,  // 0: all but middle
      0b0010010,  // 1: right pair
      0b1011101,  // 2
      0b1011011,  // 3
      0b0111010,  // 4
      0b1101011,  // 5
      0b1101111,  // 6
      0b1010010,  // 7
      0b1111111,  // 8
      0b1111011,  // 9: all but bottom-left
  };
  return masks[digit];
}

Network digits_model(int n) {
  if (n < 7) throw ValidationError("digits model needs n >= 7");
  Network net;
  const int rows = n - 6, cols = n - 3;
  net.add_variable("digit", 10);
  net.add_variable("row", rows);
  net.add_variable("col", cols);
  const auto& boxes = segment_boxes();
  for (int s = 0; s < 7; ++s) net.add_variable(indexed("act", s), 2);
  for (int s = 0; s < 7; ++s) {
    for (int i = 0; i < n; ++i) net.add_variable("r_" + std::to_string(s) + "_" + std::to_string(i), 2);
    for (int j = 0; j < n; ++j) net.add_variable("c_" + std::to_string(s) + "_" + std::to_string(j), 2);
  }
  for (int s = 0; s < 7; ++s) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        net.add_variable("p_" + std::to_string(s) + "_" + std::to_string(i) + "_" + std::to_string(j), 2);
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) net.add_variable(pixel_name(i, j), 2);
  }

  net.set_cpt(make_cpt(net, "digit", {}, std::vector<double>(10, 0.1), false));
  net.set_cpt(make_cpt(net, "row", {}, uniform_over(rows, 0, rows - 1), false));
  net.set_cpt(make_cpt(net, "col", {}, uniform_over(cols, 0, cols - 1), false));
  for (int s = 0; s < 7; ++s) {
    const SegmentBox& b = boxes[static_cast<std::size_t>(s)];
    net.set_cpt(make_cpt(net, indexed("act", s), {"digit"},
                         function_table({10}, 2, [s](const std::vector<int>& u) {
                           return static_cast<int>((segment_mask(u[0]) >> (6 - s)) & 1u);
                         }),
                         true));
    for (int i = 0; i < n; ++i) {
      net.set_cpt(make_cpt(net, "r_" + std::to_string(s) + "_" + std::to_string(i),
                           {indexed("act", s), "row"},
                           function_table({2, rows}, 2, [&](const std::vector<int>& u) {
                             const int top = u[1] + b.row;
                             return u[0] && top <= i && i < top + b.height ? 1 : 0;
                           }),
                           true));
    }
    for (int j = 0; j < n; ++j) {
      net.set_cpt(make_cpt(net, "c_" + std::to_string(s) + "_" + std::to_string(j), {"col"},
                           function_table({cols}, 2, [&](const std::vector<int>& u) {
                             const int left = u[0] + b.col;
                             return left <= j && j < left + b.width ? 1 : 0;
                           }),
                           true));
    }
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const std::string tail = std::to_string(s) + "_" + std::to_string(i) + "_" + std::to_string(j);
        net.set_cpt(make_cpt(net, "p_" + tail,
                             {"r_" + std::to_string(s) + "_" + std::to_string(i),
                              "c_" + std::to_string(s) + "_" + std::to_string(j)},
                             {1, 0, 1, 0, 1, 0, 0, 1}, true));
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      std::vector<std::string> parents;
      for (int s = 0; s < 7; ++s) {
        parents.push_back("p_" + std::to_string(s) + "_" + std::to_string(i) + "_" + std::to_string(j));
      }
      Cpt c = make_cpt(net, pixel_name(i, j), parents, noisy_or_pixel(7), false);
      c.tie_group = "pixel";
      net.set_cpt(std::move(c));
    }
  }
  set_pixel_evidence(net, n);
  net.validate();
  return net;
}

Network random_network(const RandomNetSpec& spec) {
  if (spec.n < 1 || spec.k < 0 || spec.f < 0.0 || spec.f > 1.0) {
    throw ValidationError("random network needs n >= 1, k >= 0, 0 <= f <= 1");
  }
  std::mt19937_64 rng(spec.seed);
  Network net;
  std::vector<std::vector<VarId>> parents(static_cast<std::size_t>(spec.n));
  for (int i = 0; i < spec.n; ++i) {
    std::uniform_int_distribution<int> card(2, 3);
    net.add_variable("V" + std::to_string(i), card(rng));
    std::uniform_int_distribution<int> count(0, std::min(spec.k, i));
    const int m = count(rng);
    std::vector<VarId> pool(static_cast<std::size_t>(i));
    std::iota(pool.begin(), pool.end(), 0);
    for (int t = 0; t < m; ++t) {
      std::uniform_int_distribution<int> pick(t, i - 1);
      std::swap(pool[static_cast<std::size_t>(t)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    pool.resize(static_cast<std::size_t>(m));
    std::sort(pool.begin(), pool.end());
    parents[static_cast<std::size_t>(i)] = std::move(pool);
  }
  std::vector<int> non_roots;
  for (int i = 0; i < spec.n; ++i) {
    if (!parents[static_cast<std::size_t>(i)].empty()) non_roots.push_back(i);
  }
  const auto n_functional = static_cast<std::size_t>(std::floor(spec.f * static_cast<double>(non_roots.size())));
  std::shuffle(non_roots.begin(), non_roots.end(), rng);
  std::vector<bool> functional(static_cast<std::size_t>(spec.n), false);
  for (std::size_t t = 0; t < n_functional; ++t) functional[static_cast<std::size_t>(non_roots[t])] = true;

  std::exponential_distribution<double> gamma1(1.0);
  for (int i = 0; i < spec.n; ++i) {
    Cpt c;
    c.child = i;
    c.parents = parents[static_cast<std::size_t>(i)];
    const int card = net.variable(i).cardinality;
    std::size_t rows = 1;
    for (VarId p : c.parents) rows *= static_cast<std::size_t>(net.variable(p).cardinality);
    c.values.assign(rows * static_cast<std::size_t>(card), 0.0);
    c.functional = functional[static_cast<std::size_t>(i)];
    for (std::size_t r = 0; r < rows; ++r) {
      double* row = c.values.data() + r * static_cast<std::size_t>(card);
      if (c.functional) {
        std::uniform_int_distribution<int> pick(0, card - 1);
        row[pick(rng)] = 1.0;
        continue;
      }
      double total = 0.0;
      for (int x = 0; x < card; ++x) total += row[x] = gamma1(rng);
      for (int x = 0; x < card; ++x) row[x] /= total;
    }
    net.set_cpt(std::move(c));
  }
  net.validate();
  return net;
}

Dataset rectangle_dataset(int n, Split split, std::uint64_t seed) {
  std::vector<Image> clean;
  for (int h = 1; h <= n; ++h) {
    for (int w = 1; w <= n; ++w) {
      if (h == w) continue;
      for (int r = 0; r + h <= n; ++r) {
        for (int c = 0; c + w <= n; ++c) {
          Image img{std::vector<int>(static_cast<std::size_t>(n * n), 0), h > w ? 0 : 1};
          for (int i = r; i < r + h; ++i) {
            for (int j = c; j < c + w; ++j) img.pixels[static_cast<std::size_t>(i * n + j)] = 1;
          }
          clean.push_back(std::move(img));
        }
      }
    }
  }
  const int copies = split == Split::train ? n : 2 * n;
  const int budget = copies;
  return noisy_dataset(n, clean, copies, [n, budget](const Image& img) {
    const int a = static_cast<int>(std::count(img.pixels.begin(), img.pixels.end(), 1));
    const int b = n * n - a;
    return std::min({budget, a - 1, b / 2});
  }, seed, "label");
}

Dataset digits_dataset(int n, Split split, std::uint64_t seed) {
  if (n < 7) throw ValidationError("digits dataset needs n >= 7");
  std::vector<Image> clean;
  const auto& boxes = segment_boxes();
  for (int d = 0; d < 10; ++d) {
    for (int r = 0; r + 7 <= n; ++r) {
      for (int c = 0; c + 4 <= n; ++c) {
        Image img{std::vector<int>(static_cast<std::size_t>(n * n), 0), d};
        for (int s = 0; s < 7; ++s) {
          if (!((segment_mask(d) >> (6 - s)) & 1u)) continue;
          const SegmentBox& b = boxes[static_cast<std::size_t>(s)];
          for (int i = 0; i < b.height; ++i) {
            for (int j = 0; j < b.width; ++j) {
              img.pixels[static_cast<std::size_t>((r + b.row + i) * n + c + b.col + j)] = 1;
            }
          }
        }
        clean.push_back(std::move(img));
      }
    }
  }
  const int copies = split == Split::train ? 100 : 200;
  return noisy_dataset(n, clean, copies, [n](const Image&) { return n; }, seed, "digit");
}

Dataset sample_rows(const Dataset& data, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  k = std::min(k, idx.size());
  for (std::size_t t = 0; t < k; ++t) {
    std::uniform_int_distribution<std::size_t> pick(t, idx.size() - 1);
    std::swap(idx[t], idx[pick(rng)]);
  }
  idx.resize(k);
  return data.subset(idx);
}

}  // namespace fve
