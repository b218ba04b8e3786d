#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "qsm/cli.hpp"

// Exit codes: 0 success, 2 configuration error, 3 numerical/module failure.
int main(int argc, char** argv) {
  CLI::App app{"quantum sawtooth map noise laboratory"};
  std::string config_path;
  std::string out_override, format_override;
  long long seed_override = -1;
  int threads_override = 0;
  app.add_option("--config", config_path, "run configuration (key=value text or JSON)")
      ->required();
  app.add_option("--seed", seed_override, "override the config seed");
  app.add_option("--out", out_override, "override the output directory");
  app.add_option("--format", format_override, "override the output format (csv|json|both)");
  app.add_option("--threads", threads_override,
                 "override the worker thread count (results are thread-count invariant)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad flags are configuration errors
  }

  try {
    qsm::RunConfig cfg = qsm::load_config(config_path);
    if (seed_override >= 0) cfg.raw["seed"] = std::to_string(seed_override);
    if (!out_override.empty()) cfg.raw["out"] = out_override;
    if (!format_override.empty()) cfg.raw["format"] = format_override;
    if (threads_override > 0) cfg.raw["threads"] = std::to_string(threads_override);
    qsm::run_config(cfg);
  } catch (const qsm::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
