// gscan: cluster detection, scenario simulation, risk-model fitting and
// evaluation from the command line.

#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"
#include "gscan/core.hpp"

using namespace gscan::cli;

namespace {

void add_common(CLI::App* cmd, CommonOptions& c, bool with_data = true) {
  if (with_data) {
    cmd->add_option("--data", c.data, "Counts CSV (area_id,period,observed,expected)");
    cmd->add_option("--layout", c.layout, "Counts layout: long or wide")->capture_default_str();
    cmd->add_option("--order", c.order, "File listing one area_id per line, fixing area order");
  }
  cmd->add_option("--graph", c.graph, "Adjacency CSV (area_id_1,area_id_2)");
  cmd->add_option("--centroids", c.centroids, "Centroid CSV (area_id,x,y)");
  cmd->add_option("--seed", c.seed, "Master seed; drawn at random and recorded when omitted");
  cmd->add_option("--workers", c.workers, "Worker threads, 0 = all cores")->capture_default_str();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--geojson", c.geojson, "Area polygons to decorate with results");
  cmd->add_option("--geojson-key", c.geojson_key, "Feature property holding the area id")
      ->capture_default_str();
}

void note_seed(CLI::App* cmd, CommonOptions& c) { c.seed_given = cmd->count("--seed") > 0; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time cluster detection and disease-risk estimation"};
  app.set_config("--config", "", "TOML-style key = value file; flags override it");
  app.require_subcommand(1);

  DetectOptions det;
  auto* detect = app.add_subcommand("detect", "Find high- and low-risk space-time clusters");
  add_common(detect, det.common);
  detect->add_option("--sims", det.sims, "Run on every sims/<k>/data.csv under this directory");
  detect->add_option("--method", det.method, "gscanstat or cylinder")->capture_default_str();
  detect->add_option("--K", det.k, "Nearest areas in the limiting window (0 = all)")->capture_default_str();
  detect->add_option("--tstar", det.tstar, "Half-width of the period band")->capture_default_str();
  detect->add_option("--replicates", det.replicates, "Monte Carlo replicates")->capture_default_str();
  detect->add_option("--alpha", det.alpha, "Significance level")->capture_default_str();
  detect->add_option("--baseline", det.baseline,
                     "GscanStat expected counts: conditional (rescaled to the observed total, multinomial null) or absolute (raw, Poisson null)")
      ->capture_default_str();
  detect->add_option("--directions", det.directions, "both, high or low")->capture_default_str();
  detect->add_option("--max-spatial", det.max_spatial, "Cylinder: max share of expected cases")
      ->capture_default_str();
  detect->add_option("--max-temporal", det.max_temporal, "Cylinder: max share of the study period")
      ->capture_default_str();

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate simulated datasets with known truth");
  add_common(simulate, sim.common, false);
  simulate->add_option("--grid", sim.grid, "Rook grid RxC instead of --graph");
  simulate->add_option("--periods", sim.periods, "Number of periods")->capture_default_str();
  simulate->add_option("--scenario", sim.scenario, "A_1H, A_1L, A_1H1L, B, C_1H, C_1L or C_1H1L")
      ->capture_default_str();
  simulate->add_option("--n", sim.n, "Number of datasets")->capture_default_str();
  simulate->add_option("--risk-high", sim.risk_high, "Relative risk inside high clusters")->capture_default_str();
  simulate->add_option("--risk-low", sim.risk_low, "Relative risk inside low clusters")->capture_default_str();
  simulate->add_option("--snake-length", sim.snake_length, "Areas in a snake cluster")->capture_default_str();
  simulate->add_option("--block-size", sim.block_size, "Areas in the low block of 1H1L")->capture_default_str();
  simulate->add_option("--cluster-first", sim.cluster_first, "First cluster period (1-based)")
      ->capture_default_str();
  simulate->add_option("--cluster-last", sim.cluster_last, "Last cluster period (1-based)")
      ->capture_default_str();
  simulate->add_option("--expected-constant", sim.expected_constant, "Same expected count in every cell");
  simulate->add_option("--expected-from", sim.expected_from, "Take expected counts from this dataset");
  simulate->add_option("--expected-min", sim.targets.min)->capture_default_str();
  simulate->add_option("--expected-median", sim.targets.median)->capture_default_str();
  simulate->add_option("--expected-mean", sim.targets.mean)->capture_default_str();
  simulate->add_option("--expected-max", sim.targets.max)->capture_default_str();

  FitOptions fit;
  auto* fitcmd = app.add_subcommand("fit", "Fit the Poisson risk model with GMRF random effects");
  add_common(fitcmd, fit.common);
  fitcmd->add_option("--sims", fit.sims, "Fit every sims/<k>/data.csv under this directory");
  fitcmd->add_option("--interaction", fit.interactions, "Interaction types 1-4 (several allowed)")
      ->capture_default_str();
  fitcmd->add_option("--clusters", fit.clusters, "Cluster report whose clusters become indicators");
  fitcmd->add_option("--clusters-from", fit.clusters_from, "With --sims: method directory holding clusters.json");
  fitcmd->add_option("--name", fit.name, "With --sims: output directory name per simulation");
  fitcmd->add_option("--samples", fit.samples, "Posterior draws")->capture_default_str();
  fitcmd->add_flag("--no-spatial", fit.no_spatial, "Drop the BYM2 spatial effect");
  fitcmd->add_flag("--no-temporal", fit.no_temporal, "Drop the RW1 temporal effect");
  fitcmd->add_flag("--no-interaction", fit.no_interaction, "Drop the space-time interaction");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Detection and estimation metrics against truth");
  add_common(evaluate, ev.common, false);
  evaluate->add_option("--layout", ev.common.layout, "Counts layout of the simulated data")
      ->capture_default_str();
  evaluate->add_option("--sims", ev.sims, "Simulation directory")->required();
  evaluate->add_option("--methods", ev.methods, "Detection method directories")->delimiter(',');
  evaluate->add_option("--models", ev.models, "Fit directories")->delimiter(',');
  evaluate->add_option("--scenario", ev.scenario, "Scenario label for the tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*detect) {
      note_seed(detect, det.common);
      return run_detect(det);
    }
    if (*simulate) {
      note_seed(simulate, sim.common);
      return run_simulate(sim);
    }
    if (*fitcmd) {
      note_seed(fitcmd, fit.common);
      return run_fit(fit);
    }
    note_seed(evaluate, ev.common);
    return run_evaluate(ev);
  } catch (const gscan::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_numerical() ? kNumerical : kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  }
}
