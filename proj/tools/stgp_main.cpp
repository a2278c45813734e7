// Command-line front end: generate, run, sweep, approx-psd, compare.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "stgp/commands.hpp"
#include "stgp/error.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
};

void add_common(CLI::App* cmd, Common& c, bool with_mode) {
  cmd->add_option("-c,--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", c.seed, "override the config seed");
  cmd->add_option("-o,--out", c.out, "output directory (default: config 'output')");
  if (with_mode) {
    cmd->add_option("-m,--mode", c.mode, "override the config mode")
        ->check(CLI::IsMember({"filter", "adaptive", "baseline", "sweep"}));
  }
}

stgp::ExperimentConfig resolve(const Common& c, std::string& out) {
  stgp::ExperimentConfig config = stgp::load_config(c.config);
  if (c.seed) config.seed = *c.seed;
  if (!c.mode.empty()) config.mode = stgp::parse_mode(c.mode);
  if (!c.out.empty()) config.output = c.out;
  out = config.output;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming spatio-temporal Gaussian process estimation"};
  app.require_subcommand(1);

  Common common;
  auto* generate = app.add_subcommand("generate", "draw a synthetic dataset or patrol scenario");
  auto* run = app.add_subcommand("run", "run the configured mode");
  auto* sweep = app.add_subcommand("sweep", "hyperparameter grid of streamed likelihoods");
  auto* approx = app.add_subcommand("approx-psd", "rational fits of the temporal spectrum");
  auto* compare = app.add_subcommand("compare", "fit table of filter orders and truncation buffers");
  add_common(generate, common, true);
  add_common(run, common, true);
  add_common(sweep, common, false);
  add_common(approx, common, false);
  add_common(compare, common, false);

  CLI11_PARSE(app, argc, argv);

  stgp::set_warning_sink([](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; });
  try {
    std::string out;
    const stgp::ExperimentConfig config = resolve(common, out);
    if (*generate) stgp::cmd_generate(config, out, std::cout);
    else if (*run) stgp::cmd_run(config, out, std::cout);
    else if (*sweep) stgp::cmd_sweep(config, out, std::cout);
    else if (*approx) stgp::cmd_approx_psd(config, out, std::cout);
    else if (*compare) stgp::cmd_compare(config, out, std::cout);
  } catch (const stgp::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const stgp::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const stgp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
