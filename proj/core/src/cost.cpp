#include "tailcut/cost.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "tailcut/errors.hpp"

namespace tailcut {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kSecondsPerHour = 3600.0;

// price * (t_hi + t_lo) / 3600 with the product and quotient errors
// carried by fma, so the result lands within an ulp of the exact value.
double scaled_cost(double price, double t_hi, double t_lo) {
  const double p = price * t_hi;
  const double p_err = std::fma(price, t_hi, -p) + price * t_lo;
  const double q = p / kSecondsPerHour;
  const double q_err = std::fma(-q, kSecondsPerHour, p);
  return q + (q_err + p_err) / kSecondsPerHour;
}

void require_time(double t, const char* name) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw ArgumentError(std::string(name) + " must be a finite non-negative number of seconds");
  }
}

}  // namespace

double PriceTable::price_of(const std::string& instance) const {
  const auto it = entries.find(instance);
  if (it != entries.end()) return it->second;
  std::string known;
  for (const auto& [name, price] : entries) known += (known.empty() ? "" : ", ") + name;
  throw LookupError("unknown instance type '" + instance + "'; available: " + known);
}

PriceTable parse_price_table(const std::string& json_text) {
  PriceTable table;
  try {
    const auto j = json::parse(json_text);
    table.currency = j.value("currency", std::string("USD"));
    table.source_note = j.value("source_note", std::string());
    for (const auto& [name, price] : j.at("entries").items()) {
      const double v = price.get<double>();
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw DataError("price for '" + name + "' must be positive");
      }
      table.entries.emplace(name, v);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed price table: ") + e.what());
  }
  if (table.entries.empty()) throw DataError("price table has no entries");
  return table;
}

PriceTable load_price_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open price table '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_price_table(ss.str());
}

std::string price_table_to_json(const PriceTable& table) {
  ordered_json entries = ordered_json::object();
  for (const auto& [name, price] : table.entries) entries[name] = price;
  return ordered_json{{"currency", table.currency},
                      {"source_note", table.source_note},
                      {"entries", entries}}
             .dump(2) +
         "\n";
}

PriceTable default_price_table() {
  PriceTable t;
  t.currency = "USD";
  t.source_note = "EC2 on-demand Linux list prices, us-east-1; edit to match your account";
  t.entries = {{"t3.micro", 0.0104}, {"m5.large", 0.096}, {"m5.xlarge", 0.192},
               {"c5.large", 0.085},  {"c5.xlarge", 0.17}, {"r5.large", 0.126}};
  return t;
}

double computation_cost(double price_per_hour, double time_s) {
  if (!(price_per_hour >= 0.0) || !std::isfinite(price_per_hour)) {
    throw ArgumentError("price must be a finite non-negative number");
  }
  require_time(time_s, "time");
  return scaled_cost(price_per_hour, time_s, 0.0);
}

double cost_effectiveness(double time_actual_s, double time_full_s) {
  if (!(time_full_s > 0.0)) throw ArgumentError("full computation time must be positive");
  if (!(time_actual_s > 0.0)) throw ArgumentError("actual computation time must be positive");
  if (time_actual_s > time_full_s) {
    throw ArgumentError("actual computation time exceeds full computation time");
  }
  return time_actual_s / time_full_s;
}

CostReport build_cost_report(const RunTimes& times, const PriceTable& prices,
                             const std::string& instance) {
  require_time(times.train_s, "training time");
  const double price = prices.price_of(instance);
  CostReport r;
  r.instance_type = instance;
  r.currency = prices.currency;
  r.unit_price = price;
  r.time_train_s = times.train_s;
  r.time_actual_s = times.actual_s;
  r.time_full_s = times.full_s;
  r.time_comp_s = times.train_s + times.actual_s;
  r.cost_effective = cost_effectiveness(times.actual_s, times.full_s);
  r.dollars_actual = computation_cost(price, times.actual_s);
  r.dollars_full = computation_cost(price, times.full_s);
  r.dollars_comp = computation_cost(price, r.time_comp_s);
  // TwoSum: full - actual == diff + remainder exactly.
  const double a = times.full_s;
  const double b = -times.actual_s;
  const double diff = a + b;
  const double bb = diff - a;
  const double remainder = (a - (diff - bb)) + (b - bb);
  r.dollars_saved = scaled_cost(price, diff, remainder);
  return r;
}

std::string cost_report_to_json(const CostReport& r) {
  return ordered_json{{"format", "tailcut-cost/1"},
                      {"instance_type", r.instance_type},
                      {"currency", r.currency},
                      {"unit_price_per_hour", r.unit_price},
                      {"time_train_s", r.time_train_s},
                      {"time_actual_s", r.time_actual_s},
                      {"time_full_s", r.time_full_s},
                      {"time_comp_s", r.time_comp_s},
                      {"cost_effective", r.cost_effective},
                      {"dollars_actual", r.dollars_actual},
                      {"dollars_full", r.dollars_full},
                      {"dollars_saved", r.dollars_saved},
                      {"dollars_comp", r.dollars_comp}}
             .dump(2) +
         "\n";
}

CostReport cost_report_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    CostReport r;
    r.instance_type = j.at("instance_type").get<std::string>();
    r.currency = j.at("currency").get<std::string>();
    r.unit_price = j.at("unit_price_per_hour").get<double>();
    r.time_train_s = j.at("time_train_s").get<double>();
    r.time_actual_s = j.at("time_actual_s").get<double>();
    r.time_full_s = j.at("time_full_s").get<double>();
    r.time_comp_s = j.at("time_comp_s").get<double>();
    r.cost_effective = j.at("cost_effective").get<double>();
    r.dollars_actual = j.at("dollars_actual").get<double>();
    r.dollars_full = j.at("dollars_full").get<double>();
    r.dollars_saved = j.at("dollars_saved").get<double>();
    r.dollars_comp = j.at("dollars_comp").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed cost report: ") + e.what());
  }
}

std::string format_cost_report(const CostReport& r) {
  std::ostringstream os;
  const auto line = [&](const std::string& label, const std::string& value) {
    os << std::left << std::setw(26) << label << value << '\n';
  };
  const auto secs = [](double s) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(3) << s << " s";
    return v.str();
  };
  const auto money = [&](double d) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(4) << d << ' ' << r.currency;
    return v.str();
  };
  std::ostringstream price;
  price << r.unit_price << ' ' << r.currency << "/h";
  std::ostringstream pct;
  pct << std::fixed << std::setprecision(2) << 100.0 * r.cost_effective << " %";
  line("instance", r.instance_type);
  line("unit price", price.str());
  line("time train", secs(r.time_train_s));
  line("time actual", secs(r.time_actual_s));
  line("time full", secs(r.time_full_s));
  line("time comp (train+actual)", secs(r.time_comp_s));
  line("cost effective", pct.str());
  line("cost actual", money(r.dollars_actual));
  line("cost full", money(r.dollars_full));
  line("saved", money(r.dollars_saved));
  return os.str();
}

}  // namespace tailcut
