#include <exception>
#include <filesystem>
#include <iostream>

#include "commands.hpp"
#include "condnorm/error.hpp"

namespace {

// 0 success, 2 input/schema error, 3 fit/estimation error, 4 bootstrap failure.
int exit_code(const std::exception_ptr& error) {
  using namespace condnorm;
  try {
    std::rethrow_exception(error);
  } catch (const BootstrapError&) {
    return 4;
  } catch (const FitError&) {
    return 3;
  } catch (const EstimationError&) {
    return 3;
  } catch (const BasisError&) {
    return 3;
  } catch (const Error&) {
    return 2;
  } catch (const std::filesystem::filesystem_error&) {
    return 2;
  } catch (...) {
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace condnorm::cli;
  CLI::App app{"Conditional normalization, imputation and lag-time estimation"};
  app.name("condnorm");
  RunConfig config;
  register_options(app, config);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  config.config_path = app.get_config_ptr()->as<std::string>();
  resolve_paths(config);

  try {
    config.validate();
    if (config.command == "synth" && app["--seed"]->count() == 0)
      throw condnorm::SchemaError("a seed is required (--seed or seed = N)");
    if (config.command == "clean") cmd_clean(config);
    if (config.command == "normalize") cmd_normalize(config);
    if (config.command == "impute") cmd_impute(config);
    if (config.command == "ccf") cmd_ccf(config);
    if (config.command == "lagtime") cmd_lagtime(config);
    if (config.command == "synth") cmd_synth(config);
  } catch (const std::exception& e) {
    std::cerr << "condnorm " << config.command << ": " << e.what() << '\n';
    return exit_code(std::current_exception());
  }
  return 0;
}
