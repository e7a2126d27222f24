#include "fednlp/experiment/compare.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fednlp/experiment/runner.hpp"
#include "fednlp/tensor/errors.hpp"
#include "json.hpp"

namespace fednlp::experiment {

namespace {

std::string model_label(const std::string& model) {
  if (model == "bert") return "BERT";
  if (model == "bert_mini") return "BERT-mini";
  if (model == "lstm") return "LSTM";
  return model;
}

std::string mode_label(Mode mode) {
  switch (mode) {
    case Mode::centralized: return "Centralized";
    case Mode::standalone: return "Standalone";
    case Mode::federated: return "FL";
  }
  return "?";
}

bool read_result(const std::filesystem::path& path, double& accuracy) {
  std::ifstream in(path);
  if (!in) return false;
  try {
    auto j = nlohmann::json::parse(in);
    accuracy = j.at("accuracy").get<double>();
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void write_result(const std::filesystem::path& dir, const PhaseResult& r) {
  nlohmann::json j;
  j["accuracy"] = r.final_accuracy;
  j["loss"] = r.final_loss;
  j["checksum"] = checksum_hex(r.checksum);
  if (!r.client_final_accuracy.empty()) j["client_accuracy"] = r.client_final_accuracy;
  auto tmp = dir / "result.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "result.json");
}

}  // namespace

const CompareCell& CompareTable::cell(Mode mode, const std::string& model) const {
  for (const auto& c : cells) {
    if (c.mode == mode && c.model == model) return c;
  }
  throw UsageError("compare: no cell for " + model + " / " + std::string(mode_name(mode)));
}

std::string CompareTable::format() const {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-20s", "Top-1 accuracy [%]");
  out << buf;
  for (const auto& m : models) {
    std::snprintf(buf, sizeof(buf), "%12s", model_label(m).c_str());
    out << buf;
  }
  out << "\n";
  for (Mode mode : modes) {
    std::snprintf(buf, sizeof(buf), "%-20s", mode_label(mode).c_str());
    out << buf;
    for (const auto& m : models) {
      std::snprintf(buf, sizeof(buf), "%12.1f", 100.0 * cell(mode, m).mean_accuracy);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::filesystem::path cell_dir(const CompareOptions& options, const std::string& model, Mode mode,
                               std::uint64_t replicate) {
  return options.out_dir / (model + "_" + std::string(mode_name(mode)) + "_r" + std::to_string(replicate));
}

CompareTable run_compare(const ExperimentConfig& base, const CompareOptions& options,
                         const std::function<void(const std::string&)>& log) {
  CompareTable table;
  table.models = options.models;
  table.modes = options.modes;
  for (Mode mode : options.modes) {
    for (const auto& model : options.models) {
      CompareCell cell;
      cell.model = model;
      cell.mode = mode;
      for (std::uint64_t r : base.compare_seeds) {
        auto dir = cell_dir(options, model, mode, r);
        double accuracy = 0.0;
        if (!options.force && read_result(dir / "result.json", accuracy)) {
          cell.accuracies.push_back(accuracy);
          ++cell.reused;
          if (log) log("reusing " + dir.string());
          continue;
        }
        ExperimentConfig cfg = base.replicate(r);
        cfg.model = model;
        cfg.mode = mode;
        if (model == "lstm") {
          cfg.phase = Phase::finetune_classify;
          cfg.init_from.clear();
        }
        cfg.run_id = model + "_" + std::string(mode_name(mode)) + "_r" + std::to_string(r);
        if (log) log("running " + cfg.run_id);
        RunResult result = run_experiment(cfg);
        write_outputs(cfg, result, dir);
        write_result(dir, result.last());
        cell.accuracies.push_back(result.last().final_accuracy);
      }
      double sum = 0.0;
      for (double a : cell.accuracies) sum += a;
      cell.mean_accuracy = sum / static_cast<double>(cell.accuracies.size());
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace fednlp::experiment
