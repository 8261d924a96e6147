#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "divsample/matrix.hpp"
#include "divsample/rng.hpp"
#include "divsample/synthetic_data.hpp"

namespace divsample {

// Distances use flattened sequences for APD; ADE averages the per-frame L2
// norm of the [J*C] frame vector over frames, FDE uses the last frame.
double apd(const std::vector<PoseSequence>& preds);
double ade(const std::vector<PoseSequence>& preds, const PoseSequence& gt);
double fde(const std::vector<PoseSequence>& preds, const PoseSequence& gt);
double mmade(const std::vector<PoseSequence>& preds, const std::vector<PoseSequence>& pseudo);
double mmfde(const std::vector<PoseSequence>& preds, const std::vector<PoseSequence>& pseudo);
/// (ade_m, fde_m): median over predictions instead of the minimum.
std::pair<double, double> median_metrics(const std::vector<PoseSequence>& preds, const PoseSequence& gt);

double frame_mean_distance(const PoseSequence& a, const PoseSequence& b);
double final_frame_distance(const PoseSequence& a, const PoseSequence& b);
double median(std::vector<double> values);

/// Pseudo futures per test sample, own future first.
struct MultimodalGtSet {
  std::vector<std::vector<PoseSequence>> futures;
};

/// 0.1 x the mean distance between final observed poses over all sample pairs.
double default_mm_threshold(const Dataset& data);
MultimodalGtSet mine_multimodal_gt(const Dataset& data, double threshold);

/// Top-2 principal-component coordinates of the flattened inputs.
std::vector<std::array<double, 2>> pca_project(const std::vector<PoseSequence>& preds);

struct SampleMetrics {
  std::size_t sample_id = 0;
  double apd = 0, ade = 0, fde = 0, mmade = 0, mmfde = 0, ade_m = 0, fde_m = 0;
  double modes = 0;
};

struct MetricsReport {
  std::string method;
  std::size_t k_used = 0;
  double apd = 0, ade = 0, fde = 0, mmade = 0, mmfde = 0, ade_m = 0, fde_m = 0;
  double mode_coverage = 0;  // mean number of synthetic modes hit per input
  std::vector<SampleMetrics> samples;
};

/// Produces K futures for one observed history.
using Predictor = std::function<std::vector<PoseSequence>(const PoseSequence& observed, std::size_t k, Rng& rng)>;

MetricsReport evaluate_suite(const std::string& method, const Predictor& predict, const Dataset& data,
                             const MultimodalGtSet& mm, std::size_t k, Rng& rng);

void write_report_csv(std::ostream& os, const MetricsReport& report);
void write_samples_csv(std::ostream& os, const MetricsReport& report);
void write_table(std::ostream& os, const std::vector<MetricsReport>& reports);
void write_comparison_csv(std::ostream& os, const std::vector<MetricsReport>& reports);

}  // namespace divsample
