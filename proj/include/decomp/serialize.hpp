#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "decomp/linear_map.hpp"
#include "decomp/noise_model.hpp"
#include "decomp/process.hpp"

namespace decomp {

using Json = nlohmann::json;

inline constexpr const char* kConfigSchema = "decomp-solve/config/1";
inline constexpr const char* kReportSchema = "decomp-solve/report/1";

struct RunOptions {
  std::int64_t k_min = -10;
  std::int64_t k_max = 10;
  int horizon = 1000;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  std::int64_t samples = 10000;
  double p = 2.0;
  int permutations = 500;
  std::int64_t truncation = 0;
  bool force = false;
  std::string out;
  std::optional<std::int64_t> k_start;
  std::optional<std::int64_t> k_end;
  /// Initial law for `simulate`: a model, or the fundamental marginal.
  std::optional<NoiseModel> initial;
  bool initial_fundamental = false;
  /// Solution report consumed by `verify`.
  std::string solution;
  std::vector<double> shift_v;
};

struct RunConfig {
  int dim = 1;
  LinearMap map = LinearMap::identity(1);
  NoiseProcess process{1, {}, ZeroTail{}};
  RunOptions options;
};

/// Strict parse: unknown fields, wrong types and dimension mismatches raise
/// InputError naming the offending field.
RunConfig parse_config(const std::string& text);
RunConfig config_from_json(const Json& j);

Json to_json(const RunConfig& config);
/// Canonical text: sorted keys, two-space indent, shortest round-trip numbers.
std::string serialize_config(const RunConfig& config);

Json to_json(const NoiseModel& model);
NoiseModel model_from_json(const Json& j, int dim, const std::string& path);
Json to_json(const NoiseProcess& process);
NoiseProcess process_from_json(const Json& j, int dim, const std::string& path);

Json matrix_to_json(const Eigen::MatrixXd& m);
Json vector_to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& path,
                                 std::optional<int> rows = std::nullopt,
                                 std::optional<int> cols = std::nullopt);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& path,
                                 std::optional<int> size = std::nullopt);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace decomp
