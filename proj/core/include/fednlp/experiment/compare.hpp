#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fednlp/experiment/config.hpp"

namespace fednlp::experiment {

struct CompareOptions {
  std::filesystem::path out_dir = "compare";
  /// Re-run cells that already have a result.
  bool force = false;
  std::vector<std::string> models = {"bert", "bert_mini", "lstm"};
  std::vector<Mode> modes = {Mode::centralized, Mode::standalone, Mode::federated};
};

struct CompareCell {
  std::string model;
  Mode mode = Mode::centralized;
  /// Final global-validation top-1 accuracy per replicate (standalone: mean
  /// over clients).
  std::vector<double> accuracies;
  double mean_accuracy = 0.0;
  /// Replicates loaded from an earlier run instead of trained.
  std::size_t reused = 0;
};

struct CompareTable {
  std::vector<std::string> models;
  std::vector<Mode> modes;
  std::vector<CompareCell> cells;  ///< mode-major

  const CompareCell& cell(Mode mode, const std::string& model) const;
  /// Rows Centralized / Standalone / FL, one column per model, percentages.
  std::string format() const;
};

/// Directory of one (model, mode, replicate) cell.
std::filesystem::path cell_dir(const CompareOptions& options, const std::string& model, Mode mode,
                               std::uint64_t replicate);

/// Runs the grid. Each cell writes its metrics and a result.json under
/// cell_dir(); a cell with a result.json is skipped unless options.force.
/// The LSTM column always fine-tunes from scratch.
CompareTable run_compare(const ExperimentConfig& base, const CompareOptions& options,
                         const std::function<void(const std::string&)>& log = {});

}  // namespace fednlp::experiment
