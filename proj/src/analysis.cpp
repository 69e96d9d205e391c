#include "lps/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "lps/csv.hpp"
#include "lps/metrics.hpp"

namespace lps {

using nlohmann::json;

namespace {

constexpr const char* kUnits[5] = {"mmHg*s/L", "L/mmHg", "s", "s", "L/min"};
constexpr double kZ95 = 1.6448536269514722;  // standard normal 0.95 quantile

json bound(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

NormalRanges default_normal_ranges(const GeneratorConfig& g) {
  NormalRanges r;
  for (int m = 0; m < 5; ++m) {
    const LogNormalParams& lived = g.mixtures[std::size_t(m)].low;
    const double sd = std::sqrt(lived.var);
    r[std::size_t(m)] = {std::exp(lived.mu - kZ95 * sd), std::exp(lived.mu + kZ95 * sd)};
  }
  r[4] = {4.0, INFINITY};
  return r;
}

NormalRanges read_normal_ranges(const std::filesystem::path& path, const NormalRanges& defaults) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open normal ranges " + path.string());
  NormalRanges r = defaults;
  try {
    const json j = json::parse(in);
    for (std::size_t m = 0; m < 5; ++m) {
      if (!j.contains(kConceptNames[m])) continue;
      const json& v = j.at(kConceptNames[m]);
      if (!v.is_array() || v.size() != 2) throw DataError(std::string("range for ") + kConceptNames[m] + " must be [low, high]");
      r[m].low = v[0].is_null() ? 0.0 : v[0].get<double>();
      r[m].high = v[1].is_null() ? INFINITY : v[1].get<double>();
      if (!(r[m].low <= r[m].high)) throw DataError(std::string("empty range for ") + kConceptNames[m]);
    }
  } catch (const json::exception& e) {
    throw DataError("normal ranges " + path.string() + ": " + e.what());
  }
  return r;
}

std::string range_flag(double value, const NormalRange& r) {
  if (value < r.low) return "low";
  if (value > r.high) return "high";
  return "normal";
}

std::vector<std::string> feature_names(const FeatureLayout& layout) {
  std::vector<std::string> names{"hr", "bp_sys", "bp_dias"};
  for (int i = 0; i < layout.tabular_dim; ++i) names.push_back("tab_" + std::to_string(i));
  for (int i = 0; i < layout.waveform_dim; ++i) names.push_back("wave_" + std::to_string(i));
  return names;
}

json explain_patient(const LpsModel& model, const PatientRecord& patient, const NormalRanges& ranges,
                     const BaselineModel* baseline, int ig_steps) {
  const Matrix raw = feature_matrix(Cohort{patient}, model.layout);
  const RowVector x = model.scaler.apply(raw).row(0);
  const Prediction p = predict(model, x);

  json out;
  out["id"] = patient.id;
  out["outcome"] = patient.outcome;
  out["risk"] = {{"pi", p.pi}, {"eta", p.eta}, {"predicted_class", p.y}};
  json concepts = json::array();
  for (std::size_t m = 0; m < 5; ++m)
    concepts.push_back({{"name", kConceptNames[m]},
                        {"value", p.z[m]},
                        {"unit", kUnits[m]},
                        {"normal_low", bound(ranges[m].low)},
                        {"normal_high", bound(ranges[m].high)},
                        {"flag", range_flag(p.z[m], ranges[m])}});
  out["concepts"] = concepts;
  const VitalsEstimate v = simulate_vitals(p.z, model.windkessel);
  out["vitals"] = {{"observed", {{"hr", patient.vitals.hr}, {"bp_sys", patient.vitals.bp_sys}, {"bp_dias", patient.vitals.bp_dias}}},
                   {"reconstructed", {{"hr", v.hr}, {"bp_sys", v.bp_sys}, {"bp_dias", v.bp_dias}}}};
  out["log_joint"] = {{"log_p_pi", p.terms.log_p_pi},
                      {"log_p_y", p.terms.log_p_y},
                      {"log_p_z", p.terms.log_p_z},
                      {"log_p_x", p.terms.log_p_x},
                      {"total", p.terms.total()}};

  if (baseline) {
    const Matrix xb = baseline->scaler.apply(raw);
    const RowVector reference = RowVector::Zero(xb.cols());
    const RowVector attr = integrated_gradients(baseline_classifier(*baseline), xb.row(0), reference, ig_steps);
    const double f_x = baseline->predict_proba(xb)(0);
    const double f_ref = baseline->predict_proba(Matrix(reference))(0);
    const std::vector<std::string> names = feature_names(baseline->layout);
    json rows = json::array();
    for (Eigen::Index i = 0; i < attr.size(); ++i)
      rows.push_back({{"feature", names[std::size_t(i)]}, {"value", raw(0, i)}, {"attribution", attr(i)}});
    out["baseline"] = {{"probability", f_x},
                       {"reference_probability", f_ref},
                       {"attribution_sum", attr.sum()},
                       {"attributions", rows}};
  }
  return out;
}

// Figure tables ---------------------------------------------------------------------

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("predictions file lacks column " + name);
    return std::size_t(it - header.begin());
  }
  double num(std::size_t row, std::size_t c) const {
    const std::string& s = rows[row][c];
    return s.empty() ? std::nan("") : std::stod(s);
  }
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  t.header = split_csv_line(line);
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    t.rows.push_back(split_csv_line(line));
    if (t.rows.back().size() != t.header.size())
      throw DataError(path.string() + ": line " + std::to_string(n) + " has the wrong number of cells");
  }
  return t;
}

struct RunTable {
  int run;
  Table t;
};

}  // namespace

int write_figure_tables(const std::filesystem::path& in, const std::filesystem::path& out, int bins) {
  if (bins < 1) throw UsageError("write_figure_tables: bins must be >= 1");
  std::vector<RunTable> runs;
  for (int k = 0;; ++k) {
    const std::filesystem::path p = in / ("run_" + std::to_string(k)) / "predictions.csv";
    if (!std::filesystem::exists(p)) break;
    runs.push_back({k, read_table(p)});
  }
  if (runs.empty()) throw DataError("no run_<k>/predictions.csv under " + in.string());
  std::filesystem::create_directories(out);

  {
    CsvWriter csv(out / "fig3_scatter.csv");
    csv.row({"run", "id", "quantity", "observed", "inferred"});
    const std::pair<const char*, const char*> pairs[] = {
        {"co_observed", "lps_CO"}, {"hr", "hr_lps"}, {"bp_sys", "bp_sys_lps"}, {"bp_dias", "bp_dias_lps"}};
    for (const RunTable& r : runs) {
      const std::size_t id = r.t.col("id");
      for (const auto& [obs, inf] : pairs) {
        const std::size_t co = r.t.col(obs), ci = r.t.col(inf);
        const std::string name = std::string(obs) == "co_observed" ? "CO" : obs;
        for (std::size_t i = 0; i < r.t.rows.size(); ++i) {
          if (r.t.rows[i][co].empty()) continue;
          csv.row({std::to_string(r.run), r.t.rows[i][id], name, r.t.rows[i][co], r.t.rows[i][ci]});
        }
      }
    }
  }

  // Quartile membership by π̂, ties in file order.
  auto quartiles = [](const Table& t) {
    const std::size_t c = t.col("pi_lps");
    std::vector<std::size_t> order(t.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return t.num(a, c) < t.num(b, c); });
    std::vector<int> q(t.rows.size());
    for (std::size_t r = 0; r < order.size(); ++r) q[order[r]] = int(std::min<std::size_t>(3, 4 * r / order.size()));
    return q;
  };

  {
    CsvWriter csv(out / "fig4_quartiles.csv");
    std::vector<std::string> header{"run", "quartile", "n"};
    for (const char* c : kConceptNames) header.push_back(std::string("median_") + c);
    csv.row(header);
    for (const RunTable& r : runs) {
      const std::vector<int> q = quartiles(r.t);
      for (int k = 0; k < 4; ++k) {
        std::vector<std::string> row{std::to_string(r.run), std::to_string(k + 1)};
        std::size_t n = 0;
        std::vector<std::string> cells;
        for (const char* c : kConceptNames) {
          const std::size_t col = r.t.col(std::string("lps_") + c);
          std::vector<double> v;
          for (std::size_t i = 0; i < q.size(); ++i)
            if (q[i] == k) v.push_back(r.t.num(i, col));
          n = v.size();
          cells.push_back(v.empty() ? "" : csv_number(median(v)));
        }
        row.push_back(std::to_string(n));
        row.insert(row.end(), cells.begin(), cells.end());
        csv.row(row);
      }
    }
  }

  {
    // Shared log-spaced bins per concept across runs and groups.
    CsvWriter csv(out / "fig4_histograms.csv");
    csv.row({"run", "group", "concept", "bin", "low", "high", "count"});
    for (const char* c : kConceptNames) {
      const std::string name = std::string("lps_") + c;
      double lo = INFINITY, hi = -INFINITY;
      for (const RunTable& r : runs) {
        const std::size_t col = r.t.col(name);
        for (std::size_t i = 0; i < r.t.rows.size(); ++i) {
          lo = std::min(lo, std::log(r.t.num(i, col)));
          hi = std::max(hi, std::log(r.t.num(i, col)));
        }
      }
      if (!(hi > lo)) hi = lo + 1e-9;
      const double width = (hi - lo) / bins;
      for (const RunTable& r : runs) {
        const std::vector<int> q = quartiles(r.t);
        const std::size_t col = r.t.col(name);
        for (const auto& [group, quart] : {std::pair{"bottom", 0}, std::pair{"top", 3}}) {
          std::vector<int> counts(std::size_t(bins), 0);
          for (std::size_t i = 0; i < q.size(); ++i) {
            if (q[i] != quart) continue;
            const int b = std::clamp(int((std::log(r.t.num(i, col)) - lo) / width), 0, bins - 1);
            ++counts[std::size_t(b)];
          }
          for (int b = 0; b < bins; ++b)
            csv.row({std::to_string(r.run), group, c, std::to_string(b), csv_number(std::exp(lo + b * width)),
                     csv_number(std::exp(lo + (b + 1) * width)), std::to_string(counts[std::size_t(b)])});
        }
      }
    }
  }
  return int(runs.size());
}

}  // namespace lps
