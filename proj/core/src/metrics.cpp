#include "boneage/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "boneage/error.hpp"
#include "table1_fixture.hpp"

namespace boneage {
namespace {

void check_pairs(std::span<const double> expert, std::span<const double> system,
                 const char* metric) {
  if (expert.empty()) throw ContractError(std::string(metric) + ": empty input");
  if (expert.size() != system.size()) {
    std::ostringstream msg;
    msg << metric << ": length mismatch (" << expert.size() << " expert, " << system.size()
        << " system)";
    throw ContractError(msg.str());
  }
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  return fields;
}

// Numeric ids order numerically, everything else lexicographically after them.
bool id_less(const std::string& a, const std::string& b) {
  const bool na = is_number(a), nb = is_number(b);
  if (na && nb) {
    const double da = std::stod(a), db = std::stod(b);
    if (da != db) return da < db;
    return a < b;
  }
  if (na != nb) return na;
  return a < b;
}

MetricsReport finish(std::vector<MetricsCase> cases) {
  std::sort(cases.begin(), cases.end(),
            [](const MetricsCase& a, const MetricsCase& b) { return id_less(a.id, b.id); });
  std::vector<double> expert, system;
  for (const MetricsCase& c : cases) {
    expert.push_back(c.expert_months);
    system.push_back(c.system_months);
  }
  MetricsReport report;
  report.mae_months = mae(expert, system);
  report.mape = mape(expert, system);
  report.cases = std::move(cases);
  return report;
}

}  // namespace

double mae(std::span<const double> expert, std::span<const double> system) {
  check_pairs(expert, system, "mae");
  double total = 0.0;
  for (std::size_t i = 0; i < expert.size(); ++i) total += std::fabs(expert[i] - system[i]);
  return total / static_cast<double>(expert.size());
}

double mape(std::span<const double> expert, std::span<const double> system) {
  check_pairs(expert, system, "mape");
  double total = 0.0;
  for (std::size_t i = 0; i < expert.size(); ++i) {
    if (!(expert[i] > 0.0)) throw ContractError("mape: expert values must be strictly positive");
    total += std::fabs(expert[i] - system[i]) / expert[i];
  }
  return total / static_cast<double>(expert.size());
}

MetricsReport evaluate(std::span<const IdValue> predictions, std::span<const IdValue> labels) {
  std::map<std::string, double> predicted;
  for (const auto& [id, months] : predictions) {
    if (!predicted.emplace(id, months).second) {
      throw ContractError("duplicate prediction id '" + id + "'");
    }
  }
  std::map<std::string, double> expert;
  for (const auto& [id, months] : labels) {
    if (!expert.emplace(id, months).second) throw ContractError("duplicate label id '" + id + "'");
  }
  std::vector<std::string> missing, extra;
  for (const auto& [id, months] : expert) {
    if (!predicted.count(id)) missing.push_back(id);
  }
  for (const auto& [id, months] : predicted) {
    if (!expert.count(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::ostringstream msg;
    msg << "id sets differ;";
    if (!missing.empty()) {
      msg << " missing predictions:";
      for (const auto& id : missing) msg << ' ' << id;
      msg << ';';
    }
    if (!extra.empty()) {
      msg << " unlabeled predictions:";
      for (const auto& id : extra) msg << ' ' << id;
    }
    throw ContractError(msg.str());
  }
  std::vector<MetricsCase> cases;
  for (const auto& [id, months] : expert) cases.push_back({id, months, predicted.at(id)});
  return finish(std::move(cases));
}

std::vector<IdValue> read_id_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CSV '" + path.string() + "'");
  std::vector<IdValue> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 2 || !is_number(fields[1])) {
      if (first) {
        first = false;
        continue;
      }
      throw IoError("malformed row '" + line + "' in '" + path.string() + "'");
    }
    first = false;
    rows.emplace_back(fields[0], std::stod(fields[1]));
  }
  return rows;
}

MetricsReport report_from_paired_csv(const std::string& text) {
  std::istringstream in(text);
  std::vector<MetricsCase> cases;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const bool numeric = fields.size() == 3 && is_number(fields[1]) && is_number(fields[2]);
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw IoError("malformed paired row '" + line + "'");
    }
    first = false;
    cases.push_back({fields[0], std::stod(fields[1]), std::stod(fields[2])});
  }
  return finish(std::move(cases));
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "id,expert_months,system_months,abs_error\n";
  for (const MetricsCase& c : report.cases) {
    out << c.id << ',' << c.expert_months << ',' << c.system_months << ','
        << std::fabs(c.expert_months - c.system_months) << '\n';
  }
  out << "MAE,,," << report.mae_months << '\n';
  out << "MAPE,,," << report.mape << '\n';
  return out.str();
}

std::string report_summary(const MetricsReport& report) {
  std::ostringstream out;
  out << "cases: " << report.cases.size() << '\n';
  out << std::fixed << std::setprecision(4);
  out << "MAE (months): " << report.mae_months << '\n';
  out << "MAPE: " << report.mape << '\n';
  return out.str();
}

const char* table1_csv() { return detail::kTable1Csv; }

MetricsReport table1_report() { return report_from_paired_csv(detail::kTable1Csv); }

}  // namespace boneage
