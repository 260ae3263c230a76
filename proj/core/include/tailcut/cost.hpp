#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace tailcut {

/// On-demand unit prices per instance type, dollars (or `currency`) per hour.
struct PriceTable {
  std::string currency = "USD";
  std::map<std::string, double> entries;
  std::string source_note;

  double price_of(const std::string& instance) const;  // LookupError if absent
};

PriceTable parse_price_table(const std::string& json_text);
PriceTable load_price_table(const std::filesystem::path& path);
std::string price_table_to_json(const PriceTable& table);

/// A small built-in table (Linux on-demand, us-east-1 list prices).
PriceTable default_price_table();

/// price_per_hour * time_s / 3600, rounded once.
double computation_cost(double price_per_hour, double time_s);

/// time_actual_s / time_full_s. Requires 0 < actual <= full.
double cost_effectiveness(double time_actual_s, double time_full_s);

struct RunTimes {
  double train_s = 0.0;
  double actual_s = 0.0;
  double full_s = 0.0;
};

struct CostReport {
  std::string instance_type;
  std::string currency;
  double unit_price = 0.0;
  double time_train_s = 0.0;
  double time_actual_s = 0.0;
  double time_full_s = 0.0;
  double time_comp_s = 0.0;  // train + actual
  double cost_effective = 0.0;
  double dollars_actual = 0.0;
  double dollars_full = 0.0;
  double dollars_saved = 0.0;
  double dollars_comp = 0.0;

  friend bool operator==(const CostReport&, const CostReport&) = default;
};

CostReport build_cost_report(const RunTimes& times, const PriceTable& prices,
                             const std::string& instance);

std::string cost_report_to_json(const CostReport& report);
CostReport cost_report_from_json(const std::string& text);

/// Plain-text table for terminals.
std::string format_cost_report(const CostReport& report);

}  // namespace tailcut
