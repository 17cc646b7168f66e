#include "decomp/serialize.hpp"

#include <cstdio>
#include <limits>
#include <set>

#include "decomp/error.hpp"

namespace decomp {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InputError("config field '" + path + "': " + what);
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void expect_keys(const Json& j, const std::string& path, const std::set<std::string>& allowed,
                 const std::set<std::string>& required) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) fail(child(path, key), "unknown field");
  }
  for (const auto& key : required) {
    if (!j.contains(key)) fail(child(path, key), "missing required field");
  }
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

std::int64_t integer(const Json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  }
  fail(path, "expected an integer");
}

std::uint64_t unsigned_integer(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  fail(path, "expected a nonnegative integer");
}

std::string text(const Json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::int64_t parse_index(const std::string& key, const std::string& path) {
  std::size_t used = 0;
  std::int64_t k = 0;
  try {
    k = std::stoll(key, &used);
  } catch (const std::exception&) {
    fail(path, "window keys must be integers, got '" + key + "'");
  }
  if (used != key.size() || std::to_string(k) != key) {
    fail(path, "window keys must be canonical integers, got '" + key + "'");
  }
  return k;
}

}  // namespace

// --- vectors and matrices ----------------------------------------------------

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& path, std::optional<int> size) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  if (size && static_cast<int>(j.size()) != *size) {
    fail(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(j.size()));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& path, std::optional<int> rows,
                                 std::optional<int> cols) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of rows");
  if (rows && static_cast<int>(j.size()) != *rows) {
    fail(path, "expected " + std::to_string(*rows) + " rows, got " + std::to_string(j.size()));
  }
  const int c = cols ? *cols : static_cast<int>(j[0].is_array() ? j[0].size() : 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), c);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    const Eigen::VectorXd row = vector_from_json(j[i], row_path, c);
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

// --- noise models --------------------------------------------------------------

Json to_json(const NoiseModel& model) {
  return std::visit(
      [](const auto& node) -> Json {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Dirac>) {
          return {{"type", "dirac"}, {"point", vector_to_json(node.point)}};
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return {{"type", "gaussian"}, {"mean", vector_to_json(node.mean)}, {"cov", matrix_to_json(node.cov)}};
        } else if constexpr (std::is_same_v<T, UniformBox>) {
          return {{"type", "uniform_box"}, {"lo", vector_to_json(node.lo)}, {"hi", vector_to_json(node.hi)}};
        } else if constexpr (std::is_same_v<T, Mixture>) {
          Json comps = Json::array();
          for (const auto& c : node.components) comps.push_back(to_json(c));
          return {{"type", "mixture"}, {"weights", node.weights}, {"components", comps}};
        } else if constexpr (std::is_same_v<T, Shifted>) {
          return {{"type", "shifted"}, {"base", to_json(node.base)}, {"offset", vector_to_json(node.offset)}};
        } else if constexpr (std::is_same_v<T, Pushforward>) {
          return {{"type", "pushforward"}, {"map", matrix_to_json(node.map.matrix())}, {"base", to_json(node.base)}};
        } else if constexpr (std::is_same_v<T, SampleCloud>) {
          return {{"type", "sample_cloud"}, {"points", matrix_to_json(node.points)}};
        } else {
          Json comps = Json::array();
          for (const auto& c : node.components) comps.push_back(to_json(c));
          return {{"type", "independent_sum"}, {"components", comps}};
        }
      },
      model.node().value);
}

NoiseModel model_from_json(const Json& j, int dim, const std::string& path) {
  if (!j.is_object() || !j.contains("type")) fail(path, "expected a model object with a 'type'");
  const std::string type = text(j["type"], child(path, "type"));
  try {
    if (type == "dirac") {
      expect_keys(j, path, {"type", "point"}, {"point"});
      return NoiseModel::dirac(vector_from_json(j["point"], child(path, "point"), dim));
    }
    if (type == "gaussian") {
      expect_keys(j, path, {"type", "mean", "cov"}, {"mean", "cov"});
      return NoiseModel::gaussian(vector_from_json(j["mean"], child(path, "mean"), dim),
                                  matrix_from_json(j["cov"], child(path, "cov"), dim, dim));
    }
    if (type == "uniform_box") {
      expect_keys(j, path, {"type", "lo", "hi"}, {"lo", "hi"});
      return NoiseModel::uniform_box(vector_from_json(j["lo"], child(path, "lo"), dim),
                                     vector_from_json(j["hi"], child(path, "hi"), dim));
    }
    if (type == "mixture") {
      expect_keys(j, path, {"type", "weights", "components"}, {"weights", "components"});
      const Eigen::VectorXd w = vector_from_json(j["weights"], child(path, "weights"));
      const Json& cs = j["components"];
      if (!cs.is_array()) fail(child(path, "components"), "expected an array");
      std::vector<NoiseModel> comps;
      for (std::size_t i = 0; i < cs.size(); ++i)
        comps.push_back(model_from_json(cs[i], dim, child(path, "components") + "[" + std::to_string(i) + "]"));
      return NoiseModel::mixture(std::vector<double>(w.data(), w.data() + w.size()), std::move(comps));
    }
    if (type == "shifted") {
      expect_keys(j, path, {"type", "base", "offset"}, {"base", "offset"});
      return NoiseModel::shifted(model_from_json(j["base"], dim, child(path, "base")),
                                 vector_from_json(j["offset"], child(path, "offset"), dim));
    }
    if (type == "pushforward") {
      expect_keys(j, path, {"type", "map", "base"}, {"map", "base"});
      return NoiseModel::pushforward(model_from_json(j["base"], dim, child(path, "base")),
                                     LinearMap(matrix_from_json(j["map"], child(path, "map"), dim, dim)));
    }
    if (type == "sample_cloud") {
      expect_keys(j, path, {"type", "points"}, {"points"});
      return NoiseModel::sample_cloud(matrix_from_json(j["points"], child(path, "points"), std::nullopt, dim));
    }
    if (type == "independent_sum") {
      expect_keys(j, path, {"type", "components"}, {"components"});
      const Json& cs = j["components"];
      if (!cs.is_array() || cs.empty()) fail(child(path, "components"), "expected a nonempty array");
      std::vector<NoiseModel> comps;
      for (std::size_t i = 0; i < cs.size(); ++i)
        comps.push_back(model_from_json(cs[i], dim, child(path, "components") + "[" + std::to_string(i) + "]"));
      return NoiseModel::independent_sum(std::move(comps));
    }
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config field", 0) == 0) throw;
    fail(path, msg);
  }
  fail(child(path, "type"), "unknown model type '" + type + "'");
}

// --- processes -----------------------------------------------------------------

Json to_json(const NoiseProcess& process) {
  Json window = Json::object();
  for (const auto& [k, m] : process.window()) window[std::to_string(k)] = to_json(m);
  Json tail;
  if (const auto* s = std::get_if<StationaryTail>(&process.tail())) {
    tail = {{"type", "stationary"}, {"model", to_json(s->model)}};
  } else if (const auto* pp = std::get_if<PushforwardPowerTail>(&process.tail())) {
    tail = {{"type", "pushforward_power"}, {"base", to_json(pp->base)}, {"map", matrix_to_json(pp->map.matrix())}};
  } else if (const auto* dm = std::get_if<DecayMixtureTail>(&process.tail())) {
    tail = {{"type", "decay_mixture"}, {"a", dm->a}};
  } else {
    tail = {{"type", "zero"}};
  }
  return {{"window", window}, {"tail_rule", tail}};
}

NoiseProcess process_from_json(const Json& j, int dim, const std::string& path) {
  expect_keys(j, path, {"window", "tail_rule"}, {"tail_rule"});
  std::map<std::int64_t, NoiseModel> window;
  if (j.contains("window")) {
    const Json& w = j["window"];
    const std::string wp = child(path, "window");
    if (!w.is_object()) fail(wp, "expected an object keyed by integer k");
    for (const auto& [key, value] : w.items()) {
      window.emplace(parse_index(key, wp), model_from_json(value, dim, child(wp, key)));
    }
  }
  const Json& t = j["tail_rule"];
  const std::string tp = child(path, "tail_rule");
  if (!t.is_object() || !t.contains("type")) fail(tp, "expected an object with a 'type'");
  const std::string type = text(t["type"], child(tp, "type"));
  TailRule tail = ZeroTail{};
  try {
    if (type == "stationary") {
      expect_keys(t, tp, {"type", "model"}, {"model"});
      tail = StationaryTail{model_from_json(t["model"], dim, child(tp, "model"))};
    } else if (type == "pushforward_power") {
      expect_keys(t, tp, {"type", "base", "map"}, {"base", "map"});
      tail = PushforwardPowerTail{model_from_json(t["base"], dim, child(tp, "base")),
                                  LinearMap(matrix_from_json(t["map"], child(tp, "map"), dim, dim))};
    } else if (type == "decay_mixture") {
      expect_keys(t, tp, {"type", "a"}, {"a"});
      tail = DecayMixtureTail{number(t["a"], child(tp, "a"))};
    } else if (type == "zero") {
      expect_keys(t, tp, {"type"}, {});
    } else {
      fail(child(tp, "type"), "unknown tail rule '" + type + "'");
    }
    return NoiseProcess(dim, std::move(window), std::move(tail));
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config field", 0) == 0) throw;
    fail(tp, msg);
  }
}

// --- run configuration ------------------------------------------------------

namespace {

Json options_to_json(const RunOptions& o) {
  Json j = {{"k_min", o.k_min},         {"k_max", o.k_max},     {"horizon", o.horizon},
            {"tol", o.tol},             {"seed", o.seed},       {"samples", o.samples},
            {"p", o.p},                 {"permutations", o.permutations},
            {"truncation", o.truncation}, {"force", o.force}};
  if (!o.out.empty()) j["out"] = o.out;
  if (o.k_start) j["k_start"] = *o.k_start;
  if (o.k_end) j["k_end"] = *o.k_end;
  if (o.initial_fundamental) {
    j["initial"] = "fundamental";
  } else if (o.initial) {
    j["initial"] = to_json(*o.initial);
  }
  if (!o.solution.empty()) j["solution"] = o.solution;
  if (!o.shift_v.empty()) j["shift_v"] = o.shift_v;
  return j;
}

RunOptions options_from_json(const Json& j, int dim, const std::string& path) {
  expect_keys(j, path,
              {"k_min", "k_max", "horizon", "tol", "seed", "samples", "p", "permutations",
               "truncation", "force", "out", "k_start", "k_end", "initial", "solution", "shift_v"},
              {});
  RunOptions o;
  const auto f = [&](const char* key) { return child(path, key); };
  if (j.contains("k_min")) o.k_min = integer(j["k_min"], f("k_min"));
  if (j.contains("k_max")) o.k_max = integer(j["k_max"], f("k_max"));
  if (j.contains("horizon")) o.horizon = static_cast<int>(integer(j["horizon"], f("horizon")));
  if (j.contains("tol")) o.tol = number(j["tol"], f("tol"));
  if (j.contains("seed")) o.seed = unsigned_integer(j["seed"], f("seed"));
  if (j.contains("samples")) o.samples = integer(j["samples"], f("samples"));
  if (j.contains("p")) o.p = number(j["p"], f("p"));
  if (j.contains("permutations")) o.permutations = static_cast<int>(integer(j["permutations"], f("permutations")));
  if (j.contains("truncation")) o.truncation = integer(j["truncation"], f("truncation"));
  if (j.contains("force")) {
    if (!j["force"].is_boolean()) fail(f("force"), "expected a boolean");
    o.force = j["force"].get<bool>();
  }
  if (j.contains("out")) o.out = text(j["out"], f("out"));
  if (j.contains("k_start")) o.k_start = integer(j["k_start"], f("k_start"));
  if (j.contains("k_end")) o.k_end = integer(j["k_end"], f("k_end"));
  if (j.contains("initial")) {
    if (j["initial"].is_string()) {
      if (j["initial"].get<std::string>() != "fundamental") fail(f("initial"), "expected a model or \"fundamental\"");
      o.initial_fundamental = true;
    } else {
      o.initial = model_from_json(j["initial"], dim, f("initial"));
    }
  }
  if (j.contains("solution")) o.solution = text(j["solution"], f("solution"));
  if (j.contains("shift_v")) {
    const Eigen::VectorXd v = vector_from_json(j["shift_v"], f("shift_v"), dim);
    o.shift_v.assign(v.data(), v.data() + v.size());
  }
  if (o.k_min > o.k_max) fail(f("k_min"), "must be <= k_max");
  if (o.horizon < 1) fail(f("horizon"), "must be >= 1");
  if (!(o.tol > 0.0)) fail(f("tol"), "must be > 0");
  if (o.samples < 1) fail(f("samples"), "must be >= 1");
  if (!(o.p >= 1.0)) fail(f("p"), "must be >= 1");
  if (o.permutations < 200) fail(f("permutations"), "must be >= 200");
  if (o.truncation < 0) fail(f("truncation"), "must be >= 0");
  return o;
}

}  // namespace

RunConfig config_from_json(const Json& j) {
  expect_keys(j, "", {"schema", "dim", "map", "process", "options"}, {"dim", "map", "process"});
  if (j.contains("schema") && text(j["schema"], "schema") != kConfigSchema) {
    fail("schema", std::string("unsupported schema, expected '") + kConfigSchema + "'");
  }
  RunConfig c;
  const std::int64_t dim = integer(j["dim"], "dim");
  if (dim < 1 || dim > 4096) fail("dim", "must be a positive integer");
  c.dim = static_cast<int>(dim);
  try {
    c.map = LinearMap(matrix_from_json(j["map"], "map", c.dim, c.dim));
  } catch (const InputError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config field", 0) == 0) throw;
    fail("map", msg);
  }
  c.process = process_from_json(j["process"], c.dim, "process");
  c.options = j.contains("options") ? options_from_json(j["options"], c.dim, "options") : RunOptions{};
  return c;
}

RunConfig parse_config(const std::string& text_in) {
  Json j;
  try {
    j = Json::parse(text_in);
  } catch (const Json::parse_error& e) {
    // Report the line of the offending byte.
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(e.byte, text_in.size()); ++i)
      if (text_in[i] == '\n') ++line;
    throw InputError("config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  return config_from_json(j);
}

Json to_json(const RunConfig& c) {
  return {{"schema", kConfigSchema},
          {"dim", c.dim},
          {"map", matrix_to_json(c.map.matrix())},
          {"process", to_json(c.process)},
          {"options", options_to_json(c.options)}};
}

std::string serialize_config(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

std::string fnv1a_hex(const std::string& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : t) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace decomp
