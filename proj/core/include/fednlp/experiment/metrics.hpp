#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fednlp::experiment {

inline constexpr std::string_view kMetricsHeader = "run_id,mode,model,round,scope,split,loss,top1_accuracy,wall_time_ms";

/// One measurement. `scope` is "global" or "client-<k>", `split` is "train"
/// or "validation". Round 0 holds the evaluation of the initial parameters.
struct MetricsRecord {
  std::string run_id;
  std::string mode;
  std::string model;
  std::uint32_t round = 0;
  std::string scope = "global";
  std::string split = "validation";
  double loss = 0.0;
  double top1_accuracy = 0.0;
  double wall_time_ms = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

std::string client_scope(std::size_t client);
/// Client index of a "client-<k>" scope; nullopt for "global".
std::optional<std::size_t> scope_client(std::string_view scope);

/// Orders by (round, scope, split): "global" before clients, clients by index.
void sort_records(std::vector<MetricsRecord>& records);

/// Formats a real number with 6 significant digits (%.6g).
std::string format_number(double value);

/// CSV text: header line plus one row per record in sorted order.
std::string metrics_csv(std::span<const MetricsRecord> records);

/// Writes metrics_csv(records). Throws std::runtime_error with the OS message.
void emit_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path);

/// Inverse of metrics_csv (fields must not contain commas). Throws
/// std::runtime_error on a malformed row.
std::vector<MetricsRecord> parse_metrics_csv(std::string_view text);

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

}  // namespace fednlp::experiment
