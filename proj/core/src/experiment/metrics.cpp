#include "fednlp/experiment/metrics.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace fednlp::experiment {

std::string client_scope(std::size_t client) { return "client-" + std::to_string(client); }

std::optional<std::size_t> scope_client(std::string_view scope) {
  constexpr std::string_view prefix = "client-";
  if (scope.substr(0, prefix.size()) != prefix) return std::nullopt;
  std::size_t k = 0;
  auto digits = scope.substr(prefix.size());
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
  return k;
}

void sort_records(std::vector<MetricsRecord>& records) {
  auto key = [](const MetricsRecord& r) {
    auto client = scope_client(r.scope);
    std::size_t rank = r.scope == "global" ? 0 : client ? *client + 1 : std::numeric_limits<std::size_t>::max();
    return std::make_tuple(r.round, rank, std::string_view(r.scope), std::string_view(r.split));
  };
  std::stable_sort(records.begin(), records.end(),
                   [&](const MetricsRecord& a, const MetricsRecord& b) { return key(a) < key(b); });
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

std::string metrics_csv(std::span<const MetricsRecord> records) {
  std::vector<MetricsRecord> sorted(records.begin(), records.end());
  sort_records(sorted);
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : sorted) {
    out += r.run_id + ',' + r.mode + ',' + r.model + ',' + std::to_string(r.round) + ',' + r.scope + ',' + r.split +
           ',' + format_number(r.loss) + ',' + format_number(r.top1_accuracy) + ',' + format_number(r.wall_time_ms) +
           '\n';
  }
  return out;
}

void emit_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string() + ": " + std::strerror(errno));
  out << metrics_csv(records);
  out.flush();
  if (!out) throw std::runtime_error("cannot write " + path.string() + ": " + std::strerror(errno));
}

namespace {

double parse_double(const std::string& field, std::size_t line) {
  if (field == "nan" || field == "-nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size()) {
    throw std::runtime_error("metrics line " + std::to_string(line) + ": '" + field + "' is not a number");
  }
  return v;
}

}  // namespace

std::vector<MetricsRecord> parse_metrics_csv(std::string_view text) {
  std::vector<MetricsRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1) {
      if (line != kMetricsHeader) throw std::runtime_error("metrics: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 9) throw std::runtime_error("metrics line " + std::to_string(n) + ": expected 9 fields");
    MetricsRecord r;
    r.run_id = f[0];
    r.mode = f[1];
    r.model = f[2];
    unsigned long round = 0;
    auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), round);
    if (ec != std::errc() || ptr != f[3].data() + f[3].size() || round > 0xFFFFFFFFul) {
      throw std::runtime_error("metrics line " + std::to_string(n) + ": bad round '" + f[3] + "'");
    }
    r.round = static_cast<std::uint32_t>(round);
    r.scope = f[4];
    r.split = f[5];
    r.loss = parse_double(f[6], n);
    r.top1_accuracy = parse_double(f[7], n);
    r.wall_time_ms = parse_double(f[8], n);
    records.push_back(std::move(r));
  }
  if (n == 0) throw std::runtime_error("metrics: missing header");
  return records;
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string() + ": " + std::strerror(errno));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_metrics_csv(buffer.str());
}

}  // namespace fednlp::experiment
