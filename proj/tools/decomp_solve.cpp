// decomp-solve: command-line front end.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "decomp/cli.hpp"
#include "decomp/error.hpp"
#include "decomp/io.hpp"

namespace {

std::vector<double> parse_csv_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
    if (used == 0 || used != cell.size()) throw decomp::InputError("--shift-v: bad number '" + cell + "'");
    out.push_back(v);
  }
  if (out.empty()) throw decomp::InputError("--shift-v: empty vector");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solver for the random difference equation lambda_k = mu_k * phi(lambda_{k-1})"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> samples;
  std::optional<int> horizon;
  std::optional<double> tol;
  std::optional<double> p;
  std::optional<std::string> shift_v;
  std::optional<std::string> solution;
  bool force = false;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--out", out, "Output directory for the report and data files");
    sub->add_option("--seed", seed, "Root random seed");
    sub->add_option("--samples", samples, "Draws per marginal or number of paths");
    sub->add_option("--horizon", horizon, "Series horizon");
    sub->add_option("--tol", tol, "Convergence tolerance");
    sub->add_option("--p", p, "Exponent for the l_p path route");
    sub->add_option("--shift-v", shift_v, "Comma-separated shift vector for the extremal family");
    sub->add_flag("--force", force, "Construct a solution without an existence certificate");
  };
  add_common(app.add_subcommand("analyze", "Decide existence of a solution"));
  add_common(app.add_subcommand("solve", "Construct the fundamental solution"));
  CLI::App* verify = app.add_subcommand("verify", "Check a solution against the equation");
  add_common(verify);
  verify->add_option("--solution", solution, "Solution report (default <out>/solve.json)");
  add_common(app.add_subcommand("simulate", "Simulate paths of the recursion"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : decomp::cli::kExitInput;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  decomp::cli::CommandResult result;
  try {
    decomp::RunConfig config = decomp::parse_config(decomp::read_file(config_path));
    decomp::RunOptions& o = config.options;
    if (out) o.out = *out;
    if (seed) o.seed = *seed;
    if (samples) {
      if (*samples < 1) throw decomp::InputError("--samples must be >= 1");
      o.samples = *samples;
    }
    if (horizon) {
      if (*horizon < 1) throw decomp::InputError("--horizon must be >= 1");
      o.horizon = *horizon;
    }
    if (tol) {
      if (!(*tol > 0.0)) throw decomp::InputError("--tol must be > 0");
      o.tol = *tol;
    }
    if (p) {
      if (!(*p >= 1.0)) throw decomp::InputError("--p must be >= 1");
      o.p = *p;
    }
    if (shift_v) o.shift_v = parse_csv_vector(*shift_v);
    if (solution) o.solution = *solution;
    if (force) o.force = true;
    result = decomp::cli::run_command(command, config);
  } catch (const std::exception& e) {
    result.exit_code = decomp::cli::exit_code_for(e);
    result.report = {{"schema", decomp::kReportSchema},
                     {"command", command},
                     {"exit_code", result.exit_code},
                     {"config", nullptr},
                     {"config_hash", nullptr},
                     {"seed", nullptr},
                     {"files", decomp::Json::array()},
                     {"wall_clock_seconds", 0.0},
                     {"error", {{"type", "input"}, {"message", e.what()}}}};
  }

  std::cout << result.report.dump(2) << "\n";
  if (result.report.contains("error")) {
    std::cerr << "decomp-solve " << command << ": " << result.report["error"]["message"].get<std::string>()
              << "\n";
  }
  return result.exit_code;
}
