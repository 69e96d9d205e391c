#ifndef LPS_ANALYSIS_HPP
#define LPS_ANALYSIS_HPP

// Per-patient explanations and the plot-ready tables built from an
// experiment directory.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "lps/training.hpp"

namespace lps {

struct NormalRange {
  double low = 0.0;
  double high = INFINITY;
};

// Indexed like Concepts: R, C, Ts, Td, CO.
using NormalRanges = std::array<NormalRange, 5>;

// CO >= 4 L/min; R and C span the central 90% of the lived-class generating
// component; Ts and Td likewise.
NormalRanges default_normal_ranges(const GeneratorConfig& g = {});
// JSON object keyed by concept name, each [low, high]; null means unbounded.
// Missing concepts keep the defaults.
NormalRanges read_normal_ranges(const std::filesystem::path& path, const NormalRanges& defaults);

// "low", "normal" or "high".
std::string range_flag(double value, const NormalRange& r);

std::vector<std::string> feature_names(const FeatureLayout& layout);

// Evidence for one patient: risk, class, inferred concepts with range flags,
// reconstructed vitals and the log-joint breakdown. With a baseline, adds its
// probability and Integrated Gradients attributions against the training
// mean (zero in standardized units).
nlohmann::json explain_patient(const LpsModel& model, const PatientRecord& patient, const NormalRanges& ranges,
                               const BaselineModel* baseline, int ig_steps = 256);

// Reads run_<k>/predictions.csv under `in` and writes
//   fig3_scatter.csv    inferred against true CO and reconstructed against observed vitals
//   fig4_quartiles.csv  median inferred concepts per π̂ quartile
//   fig4_histograms.csv concept histograms of the top and bottom risk quartiles
// Returns the number of runs found. Throws DataError when there are none.
int write_figure_tables(const std::filesystem::path& in, const std::filesystem::path& out, int bins = 20);

}  // namespace lps

#endif
