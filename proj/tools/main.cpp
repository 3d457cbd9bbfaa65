#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "vwb/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Villain, XY and interface model experiments"};
  app.require_subcommand(1);
  vwb::run::GlobalOptions opt;
  std::uint64_t seed = 0;
  std::string config, out_dir = ".", resume;
  bool show_keys = false;
  const std::map<std::string, std::string> about{
      {"green", "infinite-volume lattice Green's function and decay table"},
      {"charges", "enumerate charges, check primitives, tabulate activities"},
      {"verify-sums", "bounded-ratio tables for the lattice convolution sums"},
      {"simulate-spin", "Villain or XY Monte Carlo correlations on a box or small graph"},
      {"simulate-interface", "Langevin sampling of the interface model"},
      {"metric-graph", "XY on subdivided graphs against the Villain model"},
      {"heat-kernel", "heat kernel of the interface Hessian along a trajectory"},
      {"fit-decay", "power-law fit of a correlation table"},
      {"verify", "run the acceptance criteria"}};
  for (const auto& name : vwb::run::subcommand_names()) {
    auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : name);
    sub->add_option("--config", config, "key = value config file, or a run manifest");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", opt.threads, "worker threads for independent chains")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_flag("--reproducible", opt.reproducible, "single thread and fixed manifest timestamps");
    sub->add_flag("--show-keys", show_keys, "list the config keys and exit");
    if (name == "simulate-spin" || name == "simulate-interface") {
      sub->add_option("--resume", resume, "continue from a checkpoint");
      sub->add_option("--stop-after", opt.stop_after, "stop (with a checkpoint) once this many sweeps or steps are done");
    }
  }
  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommand(name);
  if (show_keys) {
    std::cout << name << " keys:\n" << vwb::run::describe_schema(vwb::run::schema_for(name));
    return 0;
  }
  opt.config = config;
  opt.out_dir = out_dir;
  opt.resume = resume;
  if (sub->count("--seed")) opt.seed = seed;
  try {
    return vwb::run::run_subcommand(name, opt);
  } catch (const vwb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
