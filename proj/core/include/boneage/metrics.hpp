#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace boneage {

/// Mean absolute error. Throws ContractError on empty or unequal inputs.
double mae(std::span<const double> expert, std::span<const double> system);

/// Mean of |expert - system| / expert. Expert values must be positive.
double mape(std::span<const double> expert, std::span<const double> system);

using IdValue = std::pair<std::string, double>;

struct MetricsCase {
  std::string id;
  double expert_months = 0.0;
  double system_months = 0.0;
};

struct MetricsReport {
  std::vector<MetricsCase> cases;  ///< sorted by id (numeric ids numerically)
  double mae_months = 0.0;
  double mape = 0.0;
};

/// Joins predictions with expert labels by id. The id sets must match
/// exactly; otherwise ContractError lists the missing and extra ids.
MetricsReport evaluate(std::span<const IdValue> predictions, std::span<const IdValue> labels);

/// Reads `id,months` rows; a non-numeric first row is taken as a header.
std::vector<IdValue> read_id_csv(const std::filesystem::path& path);

/// Parses CSV text with rows `id,expert,system` (header optional).
MetricsReport report_from_paired_csv(const std::string& text);

/// `id,expert_months,system_months,abs_error` rows plus MAE/MAPE footer rows.
std::string report_csv(const MetricsReport& report);
std::string report_summary(const MetricsReport& report);

/// Published expert/system table compiled into the library.
MetricsReport table1_report();
const char* table1_csv();

}  // namespace boneage
