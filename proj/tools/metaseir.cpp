#include <functional>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "metaseir/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> from;
  std::optional<std::string> to;
  std::optional<std::string> model;
  bool no_mobility = false;
  std::optional<std::size_t> bootstrap;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "configuration file (key = value)")->required();
  cmd->add_option("--from", o.from, "first date of the window (YYYY-MM-DD)");
  cmd->add_option("--to", o.to, "last date of the window (YYYY-MM-DD)");
  cmd->add_option("--model", o.model, "count model")->check(CLI::IsMember({"poisson", "negbin"}));
  cmd->add_flag("--no-mobility", o.no_mobility, "use the model without the mobility term");
  cmd->add_option("--bootstrap", o.bootstrap, "bootstrap replicas");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, "output directory");
}

metaseir::RunConfig resolve(const Overrides& o) {
  metaseir::RunConfig cfg = metaseir::load_config(o.config);
  if (o.from) metaseir::apply_setting(cfg, "from", *o.from);
  if (o.to) metaseir::apply_setting(cfg, "to", *o.to);
  if (o.model) metaseir::apply_setting(cfg, "model", *o.model);
  if (o.no_mobility) cfg.no_mobility = true;
  if (o.bootstrap) cfg.bootstrap = *o.bootstrap;
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  return cfg;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using Runner = std::function<void(const metaseir::RunConfig&, metaseir::Diagnostics*)>;
  const std::map<std::string, std::pair<Runner, std::string>> commands{
      {"init-state", {metaseir::run_init_state, "initialize regional states from reported cases"}},
      {"estimate", {metaseir::run_estimate, "fit transmission rates per day with bootstrap intervals"}},
      {"simulate", {metaseir::run_simulate, "simulate the window with the estimated rates"}},
      {"forecast", {metaseir::run_forecast, "issue 14-day regional forecasts"}},
      {"validate", {metaseir::run_validate, "reported, initialized and simulated series plus a delay scan"}},
      {"eval", {metaseir::run_eval, "RMSE and Spearman of forecasts against realized cases"}},
      {"compare", {metaseir::run_compare, "paired metrics of forecasts with and without mobility"}},
  };

  CLI::App app{"metapopulation SEIR estimation and forecasting"};
  app.require_subcommand(1);
  Overrides overrides;
  std::map<CLI::App*, const Runner*> dispatch;
  for (const auto& [name, entry] : commands) {
    CLI::App* cmd = app.add_subcommand(name, entry.second);
    add_flags(cmd, overrides);
    dispatch[cmd] = &entry.first;
  }
  CLI11_PARSE(app, argc, argv);

  metaseir::Diagnostics diag;
  int status = 0;
  try {
    const metaseir::RunConfig cfg = resolve(overrides);
    for (auto& [cmd, run] : dispatch) {
      if (cmd->parsed()) (*run)(cfg, &diag);
    }
  } catch (const metaseir::Error& e) {
    fmt::print(stderr, "error: code={} message=\"{}\"\n", metaseir::to_string(e.code()), escape(e.what()));
    status = 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: code=Internal message=\"{}\"\n", escape(e.what()));
    status = 2;
  }
  for (const std::string& w : diag.warnings()) fmt::print(stderr, "warning: {}\n", w);
  return status;
}
