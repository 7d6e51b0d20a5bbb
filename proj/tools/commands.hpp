#pragma once

#include <string>
#include <vector>

#include "common.hpp"
#include "gscan/simulate.hpp"

namespace gscan::cli {

struct DetectOptions {
  CommonOptions common;
  std::string sims;  // batch mode: every sims/<k>/data.csv
  std::string method = "gscanstat";
  std::size_t k = 0;
  std::size_t tstar = 0;
  std::size_t replicates = 999;
  double alpha = 0.05;
  double max_spatial = 0.5;
  double max_temporal = 0.9;
  std::string directions = "both";
  std::string baseline = "conditional";
};

struct SimulateOptions {
  CommonOptions common;
  std::string grid;  // "RxC" instead of --graph
  std::size_t periods = 4;
  std::string scenario = "A_1H";
  std::size_t n = 100;
  double risk_high = 2.5;
  double risk_low = 0.4;
  std::size_t snake_length = 25;
  std::size_t block_size = 9;
  std::size_t cluster_first = 1;  // period labels are 1-based
  std::size_t cluster_last = 3;
  double expected_constant = 0.0;
  std::string expected_from;
  ExpectedTargets targets;
};

struct FitOptions {
  CommonOptions common;
  std::string sims;
  std::vector<std::string> interactions{"4"};
  std::string clusters;       // cluster report for a single dataset
  std::string clusters_from;  // batch mode: method directory holding clusters.json
  std::string name;           // batch mode output directory
  std::size_t samples = 1000;
  bool no_spatial = false;
  bool no_temporal = false;
  bool no_interaction = false;
};

struct EvaluateOptions {
  CommonOptions common;
  std::string sims;
  std::vector<std::string> methods;
  std::vector<std::string> models;
  std::string scenario;
};

int run_detect(DetectOptions opts);
int run_simulate(SimulateOptions opts);
int run_fit(FitOptions opts);
int run_evaluate(EvaluateOptions opts);

}  // namespace gscan::cli
