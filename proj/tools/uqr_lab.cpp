#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "uqr/config.hpp"
#include "uqr/errors.hpp"
#include "uqr/experiments.hpp"
#include "uqr/parallel.hpp"

namespace {

uqr::cli::RunConfig load_with_env(const std::string& path) {
  uqr::cli::RunConfig c = uqr::cli::load_config(path);
  if (const char* s = std::getenv("UQR_LAB_SEED")) {
    try {
      std::size_t used = 0;
      c.seed = std::stoull(s, &used);
      if (used != std::string(s).size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw uqr::ConfigError(std::string("UQR_LAB_SEED is not an unsigned integer: ") + s);
    }
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropy and volume experiments for toral endomorphisms and sphere power maps"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

  std::string run_path, validate_path, out_dir;
  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("config", run_path, "Config file")->required();
  run->add_option("--output-dir", out_dir, "Override the config's output directory");
  auto* validate = app.add_subcommand("validate", "Check a config against the schema");
  validate->add_option("config", validate_path, "Config file")->required();
  auto* schema = app.add_subcommand("schema", "Print the config JSON schema");

  CLI11_PARSE(app, argc, argv);
  uqr::set_thread_count(threads);

  try {
    if (*schema) {
      std::cout << uqr::cli::config_schema().dump(2) << "\n";
      return uqr::cli::kOk;
    }
    if (*validate) {
      const auto c = load_with_env(validate_path);
      std::cout << uqr::cli::to_json(c).dump(2) << "\n";
      return uqr::cli::kOk;
    }
    auto c = load_with_env(run_path);
    if (!out_dir.empty()) c.output_dir = out_dir;
    return uqr::cli::run_and_write(c, std::cerr);
  } catch (const uqr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return uqr::cli::kConfigError;
  } catch (const uqr::BudgetError& e) {
    std::cerr << "budget error: " << e.what() << "\n";
    return uqr::cli::kBudgetError;
  } catch (const uqr::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return uqr::cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return uqr::cli::kInternalError;
  }
}
