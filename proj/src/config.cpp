#include "uqr/config.hpp"

#include <algorithm>
#include <fstream>

#include "uqr/errors.hpp"

namespace uqr::cli {

using nlohmann::json;

namespace {

json integer(long long min) { return {{"type", "integer"}, {"minimum", min}}; }
json positive_number() { return {{"type", "number"}, {"exclusiveMinimum", 0}}; }
json int_list(long long min) { return {{"type", "array"}, {"items", integer(min)}, {"minItems", 1}}; }
json number_list() { return {{"type", "array"}, {"items", positive_number()}, {"minItems", 1}}; }

json build_schema() {
  json map = {
      {"type", "object"},
      {"additionalProperties", false},
      {"required", {"family"}},
      {"properties",
       {{"family", {{"type", "string"}, {"enum", {"toral", "sphere_power", "sheared", "identity"}}}},
        {"matrix",
         {{"type", "array"},
          {"minItems", 2},
          {"items", {{"type", "array"}, {"minItems", 2}, {"items", {{"type", "integer"}}}}}}},
        {"degree", integer(2)},
        {"shear", {{"type", "number"}, {"minimum", 0}, {"maximum", 0.999999}}},
        {"profile", {{"type", "string"}, {"enum", {"sine", "bump"}}}},
        {"dim", {{"type", "integer"}, {"minimum", 2}, {"maximum", 4}}}}}};

  json budgets = {{"type", "object"},
                  {"additionalProperties", false},
                  {"properties",
                   {{"grid", integer(2)},
                    {"random_samples", integer(1)},
                    {"k_range", int_list(0)},
                    {"eps_schedule", number_list()},
                    {"mc_samples", integer(2)},
                    {"centers", integer(1)},
                    {"local_samples", integer(2)},
                    {"balanced_k", integer(0)},
                    {"balanced_samples", integer(1)},
                    {"atom_cap", integer(1)},
                    {"ks_depth", {{"type", "integer"}, {"minimum", 0}, {"maximum", 10}}},
                    {"ks_k", integer(1)},
                    {"ks_atoms", integer(1)},
                    {"ks_measure", {{"type", "string"}, {"enum", {"uniform", "balanced"}}}},
                    {"ahlfors_k", integer(0)},
                    {"ahlfors_centers", integer(1)},
                    {"ahlfors_samples", integer(2)},
                    {"radii", number_list()},
                    {"distortion_ks", int_list(1)},
                    {"distortion_samples", integer(1)},
                    {"pointwise_samples", integer(1)},
                    {"pointwise_powers", int_list(1)},
                    {"bihari_instances", integer(1)},
                    {"bihari_points", integer(3)},
                    {"write_atoms", {{"type", "boolean"}}}}}};

  json tolerances = {{"type", "object"},
                     {"additionalProperties", false},
                     {"properties",
                      {{"entropy", positive_number()},
                       {"audit", {{"type", "number"}, {"minimum", 0}}},
                       {"ks", {{"type", "number"}, {"minimum", 0}}},
                       {"balanced_residual", {{"type", "number"}, {"minimum", 0}}},
                       {"box_mass", {{"type", "number"}, {"minimum", 0}}},
                       {"equator_band", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}},
                       {"pole_cap", {{"type", "number"}, {"minimum", 0}}},
                       {"ahlfors_slope", {{"type", "number"}, {"minimum", 0}}},
                       {"ahlfors_spread", {{"type", "number"}, {"minimum", 1}}}}}};

  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "uqr_lab run configuration"},
          {"type", "object"},
          {"additionalProperties", false},
          {"required", {"experiment", "map"}},
          {"properties",
           {{"experiment", {{"type", "string"}, {"enum", kExperiments}}},
            {"map", map},
            {"seed", integer(0)},
            {"output_dir", {{"type", "string"}}},
            {"budgets", budgets},
            {"tolerances", tolerances}}}};
}

bool has_type(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  return false;
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

template <class T>
void read(const json& obj, const char* key, std::optional<T>& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

const json& config_schema() {
  static const json schema = build_schema();
  return schema;
}

void validate_against(const json& value, const json& schema, const std::string& path) {
  if (schema.contains("type") && !has_type(value, schema["type"].get<std::string>()))
    throw ConfigError(path + ": expected " + schema["type"].get<std::string>());
  if (schema.contains("enum")) {
    const auto& e = schema["enum"];
    if (std::find(e.begin(), e.end(), value) == e.end()) throw ConfigError(path + ": value " + value.dump() + " not allowed");
  }
  if (value.is_number()) {
    const double v = value.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>())
      throw ConfigError(path + ": must be >= " + schema["minimum"].dump());
    if (schema.contains("maximum") && v > schema["maximum"].get<double>())
      throw ConfigError(path + ": must be <= " + schema["maximum"].dump());
    if (schema.contains("exclusiveMinimum") && !(v > schema["exclusiveMinimum"].get<double>()))
      throw ConfigError(path + ": must be > " + schema["exclusiveMinimum"].dump());
  }
  if (value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>())
      throw ConfigError(path + ": needs at least " + schema["minItems"].dump() + " items");
    if (schema.contains("items"))
      for (std::size_t i = 0; i < value.size(); ++i)
        validate_against(value[i], schema["items"], path + "[" + std::to_string(i) + "]");
  }
  if (value.is_object()) {
    if (schema.contains("required"))
      for (const auto& r : schema["required"])
        if (!value.contains(r.get<std::string>())) throw ConfigError(path + ": missing key '" + r.get<std::string>() + "'");
    const json props = schema.value("properties", json::object());
    for (const auto& [key, v] : value.items()) {
      if (props.contains(key)) validate_against(v, props[key], path + "." + key);
      else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false)
        throw ConfigError(path + ": unknown key '" + key + "'");
    }
  }
}

dynamics::MapHandle build_map(const MapSpec& spec) {
  try {
    if (spec.family == "sphere_power") return dynamics::SpherePowerMap(spec.degree);
    if (spec.family == "identity") return dynamics::MapHandle::identity(spec.dim);
    const std::size_t n = spec.matrix.size();
    dynamics::IntMatrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.matrix[i].size() != n) throw ConfigError("map.matrix must be square");
      for (std::size_t j = 0; j < n; ++j)
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = spec.matrix[i][j];
    }
    if (n < 2 || n > 4) throw ConfigError("map.matrix must be 2x2, 3x3 or 4x4");
    dynamics::ToralEndo base(a);
    if (spec.family == "toral") return base;
    if (spec.family == "sheared")
      return dynamics::ShearedEndo(base, spec.shear, dynamics::shear_profile_from_string(spec.profile));
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown map family '" + spec.family + "'");
}

RunConfig parse_config(const json& j) {
  validate_against(j, config_schema());
  RunConfig c;
  read(j, "experiment", c.experiment);
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  const json& m = j.at("map");
  read(m, "family", c.map.family);
  read(m, "matrix", c.map.matrix);
  read(m, "degree", c.map.degree);
  read(m, "shear", c.map.shear);
  read(m, "profile", c.map.profile);
  read(m, "dim", c.map.dim);
  if (j.contains("budgets")) {
    const json& b = j["budgets"];
    Budgets& o = c.budgets;
    read(b, "grid", o.grid);
    read(b, "random_samples", o.random_samples);
    read(b, "k_range", o.k_range);
    read(b, "eps_schedule", o.eps_schedule);
    read(b, "mc_samples", o.mc_samples);
    read(b, "centers", o.centers);
    read(b, "local_samples", o.local_samples);
    read(b, "balanced_k", o.balanced_k);
    read(b, "balanced_samples", o.balanced_samples);
    read(b, "atom_cap", o.atom_cap);
    read(b, "ks_depth", o.ks_depth);
    read(b, "ks_k", o.ks_k);
    read(b, "ks_atoms", o.ks_atoms);
    read(b, "ks_measure", o.ks_measure);
    read(b, "ahlfors_k", o.ahlfors_k);
    read(b, "ahlfors_centers", o.ahlfors_centers);
    read(b, "ahlfors_samples", o.ahlfors_samples);
    read(b, "radii", o.radii);
    read(b, "distortion_ks", o.distortion_ks);
    read(b, "distortion_samples", o.distortion_samples);
    read(b, "pointwise_samples", o.pointwise_samples);
    read(b, "pointwise_powers", o.pointwise_powers);
    read(b, "bihari_instances", o.bihari_instances);
    read(b, "bihari_points", o.bihari_points);
    read(b, "write_atoms", o.write_atoms);
  }
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    Tolerances& o = c.tolerances;
    read(t, "entropy", o.entropy);
    read(t, "audit", o.audit);
    read(t, "ks", o.ks);
    read(t, "balanced_residual", o.balanced_residual);
    read(t, "box_mass", o.box_mass);
    read(t, "equator_band", o.equator_band);
    read(t, "pole_cap", o.pole_cap);
    read(t, "ahlfors_slope", o.ahlfors_slope);
    read(t, "ahlfors_spread", o.ahlfors_spread);
  }
  if (c.budgets.eps_schedule.size() < 3) throw ConfigError("$.budgets.eps_schedule: needs at least 3 values");
  if (c.budgets.k_range.size() < 3) throw ConfigError("$.budgets.k_range: needs at least 3 values");
  for (std::size_t i = 1; i < c.budgets.eps_schedule.size(); ++i)
    if (!(c.budgets.eps_schedule[i] < c.budgets.eps_schedule[i - 1]))
      throw ConfigError("$.budgets.eps_schedule: must be strictly decreasing");
  build_map(c.map);  // surfaces invalid maps as config errors
  return resolve(c);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

RunConfig resolve(RunConfig c) {
  const dynamics::MapHandle f = build_map(c.map);
  const bool sphere = f.manifold().is_sphere();
  const int n = f.manifold().dimension();
  Budgets& b = c.budgets;
  if (!b.grid) b.grid = n == 2 ? 512 : (n == 3 ? 64 : 24);
  if (!b.random_samples) b.random_samples = 300'000;
  if (!b.balanced_k) b.balanced_k = sphere ? 8 : 4;
  if (!b.balanced_samples) b.balanced_samples = sphere ? 1000 : 10'000;
  if (!b.ks_measure) b.ks_measure = sphere ? "balanced" : "uniform";
  if (!b.ahlfors_k) b.ahlfors_k = sphere ? 2 : 3;
  return c;
}

json to_json(const RunConfig& c) {
  const Budgets& b = c.budgets;
  const Tolerances& t = c.tolerances;
  json map = {{"family", c.map.family}};
  if (c.map.family == "toral" || c.map.family == "sheared") map["matrix"] = c.map.matrix;
  if (c.map.family == "sheared") {
    map["shear"] = c.map.shear;
    map["profile"] = c.map.profile;
  }
  if (c.map.family == "sphere_power") map["degree"] = c.map.degree;
  if (c.map.family == "identity") map["dim"] = c.map.dim;
  json budgets = {{"k_range", b.k_range},
                  {"eps_schedule", b.eps_schedule},
                  {"mc_samples", b.mc_samples},
                  {"centers", b.centers},
                  {"local_samples", b.local_samples},
                  {"atom_cap", b.atom_cap},
                  {"ks_depth", b.ks_depth},
                  {"ks_k", b.ks_k},
                  {"ks_atoms", b.ks_atoms},
                  {"ahlfors_centers", b.ahlfors_centers},
                  {"ahlfors_samples", b.ahlfors_samples},
                  {"radii", b.radii},
                  {"distortion_ks", b.distortion_ks},
                  {"distortion_samples", b.distortion_samples},
                  {"pointwise_samples", b.pointwise_samples},
                  {"pointwise_powers", b.pointwise_powers},
                  {"bihari_instances", b.bihari_instances},
                  {"bihari_points", b.bihari_points},
                  {"write_atoms", b.write_atoms}};
  if (b.grid) budgets["grid"] = *b.grid;
  if (b.random_samples) budgets["random_samples"] = *b.random_samples;
  if (b.balanced_k) budgets["balanced_k"] = *b.balanced_k;
  if (b.balanced_samples) budgets["balanced_samples"] = *b.balanced_samples;
  if (b.ks_measure) budgets["ks_measure"] = *b.ks_measure;
  if (b.ahlfors_k) budgets["ahlfors_k"] = *b.ahlfors_k;
  json tol = {{"audit", t.audit},
              {"ks", t.ks},
              {"balanced_residual", t.balanced_residual},
              {"box_mass", t.box_mass},
              {"equator_band", t.equator_band},
              {"pole_cap", t.pole_cap},
              {"ahlfors_slope", t.ahlfors_slope},
              {"ahlfors_spread", t.ahlfors_spread}};
  if (t.entropy) tol["entropy"] = *t.entropy;
  return {{"experiment", c.experiment}, {"map", map},         {"seed", c.seed},
          {"output_dir", c.output_dir}, {"budgets", budgets}, {"tolerances", tol}};
}

}  // namespace uqr::cli
