// SPDX-License-Identifier: Apache-2.0
//
// urae <group> <command> [--config PATH] [--seed N]

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "urae/harness.hpp"

namespace {

using urae::harness::Json;
using urae::harness::Kind;

struct Invocation {
  Kind kind = Kind::Theorem1;
  Json overrides = Json::object();
};

int run(const Invocation& inv, const std::string& config_path, std::optional<std::uint64_t> seed) {
  namespace h = urae::harness;
  try {
    const Json user = config_path.empty() ? Json::object() : h::load_config(config_path);
    Json overrides = inv.overrides;
    if (seed) overrides["seed"] = *seed;
    const Json config = h::resolve_config(inv.kind, user, overrides);
    const std::size_t threads = h::worker_threads();
    const auto result = h::run_experiment(inv.kind, config, threads);
    if (inv.kind == Kind::ArchiveInspect) {
      std::cout << result.report["summary"].dump(2) << "\n";
    } else {
      for (const auto& f : result.outputs) std::cout << f.string() << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    const Json failure = h::failure_report(e);
    std::cerr << failure.dump() << "\n";
    return failure["error"]["exit_code"].get<int>();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank adapter, synthetic-data and guidance experiments"};
  app.set_version_flag("--version", std::string(urae::harness::version()));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<Invocation> chosen;

  auto leaf = [&](CLI::App* group, const std::string& name, const std::string& help, Kind kind,
                  Json overrides = Json::object()) {
    auto* cmd = group->add_subcommand(name, help);
    cmd->add_option("--config", config_path, "Flat JSON config");
    cmd->add_option("--seed", seed, "Master seed (overrides the config)");
    cmd->callback([&chosen, kind, overrides] { chosen = Invocation{kind, overrides}; });
  };

  auto* sim = app.add_subcommand("sim", "Synthetic-vs-real trade-off simulations")->require_subcommand(1);
  leaf(sim, "theorem1", "Error bound vs. Monte Carlo at a few mixture weights", Kind::Theorem1);
  leaf(sim, "sweep-p", "Error across a grid of synthetic fractions", Kind::Fig2Sweep);

  auto* toy = app.add_subcommand("toy", "2-D flow-matching toy")->require_subcommand(1);
  leaf(toy, "train", "Train a class-conditional model", Kind::ToyTrain);
  leaf(toy, "distill", "Distill guidance into a g-conditioned student", Kind::ToyDistill);
  leaf(toy, "adapt", "Adapt the student to shifted data at several training g", Kind::CfgAdapt);

  auto* adapter = app.add_subcommand("adapter", "Low-rank adapter operations")->require_subcommand(1);
  leaf(adapter, "split", "Split a stored matrix into residual and adapter", Kind::AdapterOp, {{"op", "split"}});
  leaf(adapter, "merge", "Merge an adapter into a stored matrix", Kind::AdapterOp, {{"op", "merge"}});

  auto* archive = app.add_subcommand("archive", "Tensor archives")->require_subcommand(1);
  leaf(archive, "inspect", "List entries and metadata", Kind::ArchiveInspect);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run(*chosen, config_path, seed);
}
