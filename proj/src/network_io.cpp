#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fve/network.hpp"

namespace fve {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

Network network_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed network file: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("network file must be an object");
  Network net;
  for (const auto& v : field<json>(doc, "variables", "network")) {
    const auto name = field<std::string>(v, "id", "variable");
    const int card = field<int>(v, "cardinality", "variable '" + name + "'");
    if (card < 2) throw ValidationError("variable '" + name + "' needs cardinality >= 2");
    net.add_variable(name, card);
  }
  for (const auto& c : field<json>(doc, "cpts", "network")) {
    const auto child = field<std::string>(c, "child", "cpt");
    const std::string where = "cpt '" + child + "'";
    Cpt cpt;
    cpt.child = net.id(child);
    if (net.has_cpt(cpt.child)) throw ValidationError(where + ": duplicate CPT");
    for (const auto& p : field<std::vector<std::string>>(c, "parents", where)) {
      cpt.parents.push_back(net.id(p));
    }
    cpt.values = field<std::vector<double>>(c, "values", where);
    cpt.functional = c.value("functional", false);
    cpt.trainable = c.value("trainable", true);
    if (c.contains("tie_group") && !c.at("tie_group").is_null()) {
      cpt.tie_group = field<std::string>(c, "tie_group", where);
    }
    net.set_cpt(std::move(cpt));
  }
  if (doc.contains("evidence")) {
    for (const auto& e : doc.at("evidence").get<std::vector<std::string>>()) {
      net.evidence.push_back(net.id(e));
    }
  }
  for (std::size_t v = 0; v < net.size(); ++v) {
    if (!net.has_cpt(static_cast<VarId>(v))) {
      throw ValidationError("variable '" + net.name(static_cast<VarId>(v)) + "' has no CPT");
    }
  }
  net.validate();
  return net;
}

std::string network_to_json(const Network& net) {
  json doc;
  doc["variables"] = json::array();
  doc["cpts"] = json::array();
  for (std::size_t v = 0; v < net.size(); ++v) {
    const auto id = static_cast<VarId>(v);
    doc["variables"].push_back({{"id", net.name(id)}, {"cardinality", net.variable(id).cardinality}});
  }
  for (std::size_t v = 0; v < net.size(); ++v) {
    const Cpt& c = net.cpt(static_cast<VarId>(v));
    json parents = json::array();
    for (VarId p : c.parents) parents.push_back(net.name(p));
    json entry = {{"child", net.name(c.child)},
                  {"parents", parents},
                  {"values", c.values},
                  {"functional", c.functional},
                  {"trainable", c.trainable}};
    if (!c.tie_group.empty()) entry["tie_group"] = c.tie_group;
    doc["cpts"].push_back(std::move(entry));
  }
  if (!net.evidence.empty()) {
    json ev = json::array();
    for (VarId e : net.evidence) ev.push_back(net.name(e));
    doc["evidence"] = ev;
  }
  return doc.dump(1);
}

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open network file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return network_from_json(buf.str());
}

void save_network(const Network& network, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write network file '" + path + "'");
  out << network_to_json(network) << '\n';
}

}  // namespace fve
