// Copyright 2026 The ellipse-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ellipse/harness.hpp"
#include "json.hpp"

namespace ellipse::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode { kPass = 0, kFail = 1, kUsage = 2, kNumerical = 3 };

/// One experiment of a run. Fields that an experiment type does not use are ignored.
struct ExperimentConfig {
  /// averaged_local_law | isotropic_local_law | error_matrix | delocalisation |
  /// linear_statistics | small_singular_scan | girko | monte_carlo | density_map
  std::string type;
  std::string name;  ///< file stem; defaults to type
  std::vector<int> n_values{256};
  std::vector<Complex> zeta{Complex(0.3, 0.2)};
  std::vector<double> beta{0.75};
  int trials = 1;
  double delta = 0.1;
  Thresholds thresholds;
  // probes
  int random_probes = 6;
  std::uint64_t probe_seed = 7;
  // test function (linear_statistics, girko)
  std::string function_kind = "polynomial-bump";
  Complex center{0.2, 0.1};
  double alpha = 0.25;
  double radius = 1.0;
  // girko
  double quad_tol = 1e-6;
  double tolerance = 1e-3;
  // monte_carlo
  std::string mc_function = "quadratic";
  int m = 100;
  double mc_delta = 0.1;
  int repetitions = 1000;
  // density_map
  int resolution = 64;
  double min_mass_inside = 0.98;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  EnsembleSpec ensemble{0, 0.5, 0.5, BaseDistribution::kGaussian, 1};  ///< n comes from each experiment
  std::string output_dir = "ellipse_out";
  std::string format = "jsonl";  ///< jsonl | csv for record files
  int threads = 1;
  std::vector<ExperimentConfig> experiments;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Reads and validates a config file; throws std::invalid_argument on any problem.
RunConfig load_config(const std::string& path);

/// ELLIPSE_OUT_DIR if set, otherwise "ellipse_out".
std::string default_output_dir();

struct ExperimentOutcome {
  std::vector<ExperimentReport> reports;
  std::vector<std::string> files;
  bool pass = true;
};

/// Runs one experiment and writes its record and summary files under run.output_dir.
ExperimentOutcome run_experiment(const RunConfig& run, const ExperimentConfig& exp);

/// Record file in CSV form: experiment,n,zeta,eta,trial,statistic,error,envelope,pass.
void write_records_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace ellipse::cli
