// hartree_lab: experiment driver. See docs/config.md for the config grammar.

#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "hartree/driver.hpp"

namespace {

const std::map<std::string, std::string> kAbout = {
    {"sample", "Brownian paths and their mean occupation densities"},
    {"energies", "trap and pair energies of one sampled ensemble, ILT checks"},
    {"cgf", "scaled cumulant generating function of a tilt (PDE, optional MC)"},
    {"rate", "rate function J(mu) by dual ascent"},
    {"chi", "entropy-plus-trap minimisation over densities"},
    {"gp", "Gross-Pitaevskii ground state by normalised gradient flow"},
    {"hartree", "Hartree energy per particle for each N"},
    {"free-energy", "Monte Carlo free energy per particle for each N"},
    {"tilted", "tilted Monte Carlo free energy for each N"},
    {"lln", "L1 distance of the weighted occupation to the chi minimiser"},
    {"trend-gp", "chi minimum against the GP energy across beta_list"},
    {"trend-hartree", "Hartree energy against the GP energy across N"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-integral Hartree / Gross-Pitaevskii experiment driver"};
  app.require_subcommand(1, 1);
  hartree::RunRequest req;
  std::uint64_t seed = 0;
  std::string out;
  for (const auto& name : hartree::subcommands()) {
    auto* sub = app.add_subcommand(name, kAbout.at(name));
    sub->add_option("--config", req.config_path, "Config file (key = value lines)");
    sub->add_option("--set", req.overrides, "Override KEY=VALUE (repeatable)")->allow_extra_args(false);
    sub->add_option("--out", out, "Output root directory");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_option("--threads", req.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->final_callback([&req, name] { req.subcommand = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) req.seed = seed;
    if (sub->count("--out")) req.out = out;
  }
  return hartree::run(req).exit_code;
}
