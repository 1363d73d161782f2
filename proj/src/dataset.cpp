#include <algorithm>
#include <fstream>
#include <sstream>

#include "fve/error.hpp"
#include "fve/train.hpp"

namespace fve {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_cell(const std::string& cell, std::size_t line) {
  if (cell == "?") return -1;
  try {
    std::size_t used = 0;
    const int v = std::stoi(cell, &used);
    if (used != cell.size() || v < 0) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("dataset line " + std::to_string(line) + ": bad value '" + cell + "'");
  }
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.columns = columns;
  out.label = label;
  for (std::size_t i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty dataset file");
  auto header = split(line);
  if (header.empty()) throw ValidationError(path + ": empty header");
  Dataset data;
  data.label = header.back();
  header.pop_back();
  data.columns = std::move(header);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != data.columns.size() + 1) {
      throw ValidationError(path + ": line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells");
    }
    std::vector<int> row;
    for (std::size_t k = 0; k < data.columns.size(); ++k) row.push_back(parse_cell(cells[k], lineno));
    const int label = parse_cell(cells.back(), lineno);
    if (label < 0) throw ValidationError(path + ": line " + std::to_string(lineno) + " has no label");
    data.rows.push_back(std::move(row));
    data.labels.push_back(label);
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  for (const auto& c : data.columns) out << c << ',';
  out << data.label << '\n';
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    for (int v : data.rows[r]) {
      if (v < 0) {
        out << "?,";
      } else {
        out << v << ',';
      }
    }
    out << data.labels[r] << '\n';
  }
}

Batch make_batch(const OpsGraph& graph, const Dataset& data, std::span<const std::size_t> rows) {
  Batch batch;
  batch.size = rows.size();
  for (const auto& name : graph.inputs) {
    const auto col = std::find(data.columns.begin(), data.columns.end(), name) - data.columns.begin();
    if (col == static_cast<std::ptrdiff_t>(data.columns.size())) continue;
    const auto& var = graph.variables[static_cast<std::size_t>(graph.variable_index(name))];
    const auto width = static_cast<std::size_t>(var.full_cardinality);
    auto& lam = batch.evidence[name];
    lam.assign(rows.size() * width, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int v = data.rows.at(rows[r])[static_cast<std::size_t>(col)];
      if (v < 0) {
        std::fill_n(lam.begin() + static_cast<std::ptrdiff_t>(r * width), width, 1.0);
      } else if (static_cast<std::size_t>(v) >= width) {
        throw ValidationError("value " + std::to_string(v) + " out of range for " + name);
      } else {
        lam[r * width + static_cast<std::size_t>(v)] = 1.0;
      }
    }
  }
  for (std::size_t r : rows) batch.labels.push_back(data.labels.at(r));
  return batch;
}

Batch make_batch(const OpsGraph& graph, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch(graph, data, all);
}

}  // namespace fve
