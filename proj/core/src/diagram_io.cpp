#include "rtd/diagram_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json_detail.hpp"
#include "rtd/errors.hpp"

namespace rtd {

using nlohmann::json;

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(where + ": expected a number");
    out.push_back(x.get<double>());
  }
  return out;
}

VarId lookup(const InfluenceDiagram& d, const json& name, const std::string& where) {
  const std::string s = text(name, where);
  auto id = d.find(s);
  if (!id) throw ConfigError(where + ": unknown variable '" + s + "'");
  return *id;
}

Factor build_factor(const InfluenceDiagram& d, std::vector<VarId> scope, std::vector<double> table, FactorRole role,
                    VarId child, const std::string& where) {
  std::vector<int> card;
  std::size_t n = 1;
  for (VarId v : scope) {
    card.push_back(d.variables[v].size());
    n *= static_cast<std::size_t>(card.back());
  }
  if (table.size() != n)
    throw ConfigError(where + ".table: expected " + std::to_string(n) + " entries, got " +
                      std::to_string(table.size()));
  return Factor(std::move(scope), std::move(card), std::move(table), role, child);
}

}  // namespace

InfluenceDiagram diagram_from_json(const json& j) {
  InfluenceDiagram d;
  if (!j.is_object()) throw ConfigError("diagram: expected an object");
  const std::string sign = j.contains("sign") ? text(j.at("sign"), "sign") : "maximize";
  if (sign == "maximize")
    d.sign = Sign::Maximize;
  else if (sign == "minimize")
    d.sign = Sign::Minimize;
  else
    throw ConfigError("sign: expected 'maximize' or 'minimize'");

  const json& vars = field(j, "variables", "diagram");
  if (!vars.is_array()) throw ConfigError("variables: expected an array");
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string where = "variables[" + std::to_string(i) + "]";
    Variable v;
    v.id = static_cast<VarId>(i);
    v.name = text(field(vars[i], "name", where), where + ".name");
    const json& dom = field(vars[i], "domain", where);
    if (!dom.is_array() || dom.empty()) throw ConfigError(where + ".domain: expected a nonempty array");
    for (const auto& x : dom) v.domain.push_back(text(x, where + ".domain"));
    const std::string kind = vars[i].contains("kind") ? text(vars[i].at("kind"), where + ".kind") : "chance";
    if (kind == "chance")
      v.kind = VarKind::Chance;
    else if (kind == "decision")
      v.kind = VarKind::Decision;
    else
      throw ConfigError(where + ".kind: expected 'chance' or 'decision'");
    if (d.find(v.name)) throw ConfigError(where + ".name: duplicate '" + v.name + "'");
    d.variables.push_back(std::move(v));
  }

  if (j.contains("cpts")) {
    const json& cpts = j.at("cpts");
    if (!cpts.is_array()) throw ConfigError("cpts: expected an array");
    for (std::size_t i = 0; i < cpts.size(); ++i) {
      const std::string where = "cpts[" + std::to_string(i) + "]";
      const VarId child = lookup(d, field(cpts[i], "child", where), where + ".child");
      std::vector<VarId> scope;
      if (cpts[i].contains("parents")) {
        const json& ps = cpts[i].at("parents");
        if (!ps.is_array()) throw ConfigError(where + ".parents: expected an array");
        for (const auto& p : ps) scope.push_back(lookup(d, p, where + ".parents"));
      }
      scope.push_back(child);
      d.cpts.push_back(build_factor(d, std::move(scope), numbers(field(cpts[i], "table", where), where + ".table"),
                                    FactorRole::Cpt, child, where));
    }
  }

  if (j.contains("decisions")) {
    const json& decs = j.at("decisions");
    if (!decs.is_array()) throw ConfigError("decisions: expected an array");
    for (std::size_t i = 0; i < decs.size(); ++i) {
      const std::string where = "decisions[" + std::to_string(i) + "]";
      DecisionStage st;
      st.var = lookup(d, field(decs[i], "variable", where), where + ".variable");
      if (decs[i].contains("observes")) {
        const json& obs = decs[i].at("observes");
        if (!obs.is_array()) throw ConfigError(where + ".observes: expected an array");
        for (const auto& o : obs) st.observes.push_back(lookup(d, o, where + ".observes"));
      }
      d.decisions.push_back(std::move(st));
    }
  }

  if (j.contains("utilities")) {
    const json& us = j.at("utilities");
    if (!us.is_array()) throw ConfigError("utilities: expected an array");
    for (std::size_t i = 0; i < us.size(); ++i) {
      const std::string where = "utilities[" + std::to_string(i) + "]";
      std::vector<VarId> scope;
      const json& sc = field(us[i], "scope", where);
      if (!sc.is_array()) throw ConfigError(where + ".scope: expected an array");
      for (const auto& s : sc) scope.push_back(lookup(d, s, where + ".scope"));
      d.utilities.push_back(build_factor(d, std::move(scope), numbers(field(us[i], "table", where), where + ".table"),
                                         FactorRole::Utility, -1, where));
    }
  }

  const auto problems = validate(d);
  if (!problems.empty()) throw ConfigError("diagram: " + problems.front());
  return d;
}

json diagram_to_json(const InfluenceDiagram& d) {
  json j;
  j["sign"] = d.sign == Sign::Maximize ? "maximize" : "minimize";
  j["variables"] = json::array();
  for (const auto& v : d.variables)
    j["variables"].push_back(
        {{"name", v.name}, {"domain", v.domain}, {"kind", v.kind == VarKind::Chance ? "chance" : "decision"}});
  j["cpts"] = json::array();
  for (const auto& f : d.cpts) {
    json parents = json::array();
    for (VarId v : f.scope)
      if (v != f.child) parents.push_back(d.variables[v].name);
    if (f.scope.back() != f.child) throw ConfigError("cpt scope must end with its child");
    j["cpts"].push_back({{"child", d.variables[f.child].name}, {"parents", parents}, {"table", f.table}});
  }
  j["decisions"] = json::array();
  for (const auto& st : d.decisions) {
    json obs = json::array();
    for (VarId v : st.observes) obs.push_back(d.variables[v].name);
    j["decisions"].push_back({{"variable", d.variables[st.var].name}, {"observes", obs}});
  }
  j["utilities"] = json::array();
  for (const auto& f : d.utilities) {
    json scope = json::array();
    for (VarId v : f.scope) scope.push_back(d.variables[v].name);
    j["utilities"].push_back({{"scope", scope}, {"table", f.table}});
  }
  return j;
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

InfluenceDiagram load_diagram(const std::string& path) {
  try {
    return diagram_from_json(load_json(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw std::runtime_error(tmp + ": write failed");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error(path + ": rename failed");
  }
}

InfluenceDiagram parse_diagram(const std::string& text) {
  try {
    return diagram_from_json(json::parse(text, nullptr, true, true));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("diagram: ") + e.what());
  }
}

std::string format_diagram(const InfluenceDiagram& d) { return diagram_to_json(d).dump(2) + "\n"; }

void save_diagram(const InfluenceDiagram& d, const std::string& path) { write_file_atomic(path, format_diagram(d)); }

Evidence parse_evidence(const InfluenceDiagram& d, const std::vector<std::string>& pairs) {
  Evidence e;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw ConfigError("evidence '" + p + "': expected name=value");
    const std::string name = p.substr(0, eq), label = p.substr(eq + 1);
    auto id = d.find(name);
    if (!id) throw ConfigError("evidence: unknown variable '" + name + "'");
    const auto& dom = d.variables[*id].domain;
    auto it = std::find(dom.begin(), dom.end(), label);
    if (it == dom.end()) throw ConfigError("evidence: '" + label + "' is not a value of " + name);
    e[*id] = static_cast<int>(it - dom.begin());
  }
  return e;
}

}  // namespace rtd
