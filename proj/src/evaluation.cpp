#include "divsample/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>

namespace divsample {

namespace {

void check_same(const PoseSequence& a, const PoseSequence& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument(std::string(what) + ": shape [" + std::to_string(a.rows) + ", " +
                                std::to_string(a.cols) + "] vs [" + std::to_string(b.rows) + ", " +
                                std::to_string(b.cols) + "]");
  }
}

double frame_distance(const PoseSequence& a, const PoseSequence& b, std::size_t t) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double d = a(r, t) - b(r, t);
    s += d * d;
  }
  return std::sqrt(s);
}

void need_preds(const std::vector<PoseSequence>& preds, std::size_t k, const char* what) {
  if (preds.size() < k) throw std::invalid_argument(std::string(what) + ": needs at least " + std::to_string(k) +
                                                    " predictions");
}

template <typename Dist>
double min_over(const std::vector<PoseSequence>& preds, const PoseSequence& gt, Dist dist) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : preds) best = std::min(best, dist(p, gt));
  return best;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> final_observed_pose(const MotionSample& s) {
  std::vector<double> out(s.observed.rows);
  for (std::size_t r = 0; r < s.observed.rows; ++r) out[r] = s.observed(r, s.observed.cols - 1);
  return out;
}

double l2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

double frame_mean_distance(const PoseSequence& a, const PoseSequence& b) {
  check_same(a, b, "ade");
  double s = 0.0;
  for (std::size_t t = 0; t < a.cols; ++t) s += frame_distance(a, b, t);
  return s / static_cast<double>(a.cols);
}

double final_frame_distance(const PoseSequence& a, const PoseSequence& b) {
  check_same(a, b, "fde");
  return frame_distance(a, b, a.cols - 1);
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double apd(const std::vector<PoseSequence>& preds) {
  need_preds(preds, 2, "apd");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = i + 1; j < preds.size(); ++j) {
      check_same(preds[i], preds[j], "apd");
      double s = 0.0;
      for (std::size_t e = 0; e < preds[i].data.size(); ++e) {
        const double d = preds[i].data[e] - preds[j].data[e];
        s += d * d;
      }
      total += 2.0 * std::sqrt(s);
    }
  }
  const double k = static_cast<double>(preds.size());
  return total / (k * (k - 1.0));
}

double ade(const std::vector<PoseSequence>& preds, const PoseSequence& gt) {
  need_preds(preds, 1, "ade");
  return min_over(preds, gt, frame_mean_distance);
}

double fde(const std::vector<PoseSequence>& preds, const PoseSequence& gt) {
  need_preds(preds, 1, "fde");
  return min_over(preds, gt, final_frame_distance);
}

double mmade(const std::vector<PoseSequence>& preds, const std::vector<PoseSequence>& pseudo) {
  if (pseudo.empty()) throw std::invalid_argument("mmade: empty pseudo ground-truth set");
  double s = 0.0;
  for (const auto& y : pseudo) s += ade(preds, y);
  return s / static_cast<double>(pseudo.size());
}

double mmfde(const std::vector<PoseSequence>& preds, const std::vector<PoseSequence>& pseudo) {
  if (pseudo.empty()) throw std::invalid_argument("mmfde: empty pseudo ground-truth set");
  double s = 0.0;
  for (const auto& y : pseudo) s += fde(preds, y);
  return s / static_cast<double>(pseudo.size());
}

std::pair<double, double> median_metrics(const std::vector<PoseSequence>& preds, const PoseSequence& gt) {
  need_preds(preds, 1, "median_metrics");
  std::vector<double> a, f;
  for (const auto& p : preds) {
    a.push_back(frame_mean_distance(p, gt));
    f.push_back(final_frame_distance(p, gt));
  }
  return {median(a), median(f)};
}

double default_mm_threshold(const Dataset& data) {
  std::vector<std::vector<double>> poses;
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& s : *split) poses.push_back(final_observed_pose(s));
  }
  if (poses.size() < 2) throw std::invalid_argument("default_mm_threshold: need at least two samples");
  double total = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (std::size_t j = i + 1; j < poses.size(); ++j) total += l2(poses[i], poses[j]);
  }
  const double n = static_cast<double>(poses.size());
  return 0.1 * total / (n * (n - 1.0) / 2.0);
}

MultimodalGtSet mine_multimodal_gt(const Dataset& data, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("mine_multimodal_gt: threshold must be > 0");
  MultimodalGtSet out;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const auto& q = data.test[i];
    const auto qp = final_observed_pose(q);
    std::vector<PoseSequence> set{q.future};
    for (const auto& s : data.train) {
      if (l2(qp, final_observed_pose(s)) <= threshold) set.push_back(s.future);
    }
    for (std::size_t j = 0; j < data.test.size(); ++j) {
      if (j != i && l2(qp, final_observed_pose(data.test[j])) <= threshold) set.push_back(data.test[j].future);
    }
    out.futures.push_back(std::move(set));
  }
  return out;
}

std::vector<std::array<double, 2>> pca_project(const std::vector<PoseSequence>& preds) {
  if (preds.size() < 3) throw std::invalid_argument("pca_project: needs at least 3 sequences");
  const auto n = static_cast<Eigen::Index>(preds.size());
  const auto d = static_cast<Eigen::Index>(preds.front().data.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = preds[static_cast<std::size_t>(i)].data;
    if (static_cast<Eigen::Index>(p.size()) != d) throw std::invalid_argument("pca_project: inconsistent shapes");
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = p[static_cast<std::size_t>(j)];
  }
  x.rowwise() -= x.colwise().mean();

  // Scores from whichever of the covariance or Gram matrix is smaller.
  Eigen::MatrixXd scores(n, 2);
  scores.setZero();
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * x);
    for (int c = 0; c < 2 && c < d; ++c) {
      Eigen::VectorXd v = es.eigenvectors().col(d - 1 - c);
      Eigen::Index arg;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      scores.col(c) = x * v;
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x * x.transpose());
    for (int c = 0; c < 2; ++c) {
      const double lambda = es.eigenvalues()(n - 1 - c);
      if (lambda <= 1e-12 * std::max(1.0, es.eigenvalues()(n - 1))) continue;
      Eigen::VectorXd v = x.transpose() * es.eigenvectors().col(n - 1 - c) / std::sqrt(lambda);
      Eigen::Index arg;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      scores.col(c) = x * v;
    }
  }
  std::vector<std::array<double, 2>> out(preds.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 2; ++c) {
      const double s = scores(i, c);
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = std::abs(s) < 1e-12 ? 0.0 : s;
    }
  }
  return out;
}

MetricsReport evaluate_suite(const std::string& method, const Predictor& predict, const Dataset& data,
                             const MultimodalGtSet& mm, std::size_t k, Rng& rng) {
  if (data.test.empty()) throw std::invalid_argument("evaluate_suite: empty test set");
  if (mm.futures.size() != data.test.size()) {
    throw std::invalid_argument("evaluate_suite: pseudo ground truth does not match the test split");
  }
  if (k < 2) throw std::invalid_argument("evaluate_suite: K must be >= 2");
  MetricsReport rep;
  rep.method = method;
  rep.k_used = k;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const auto& s = data.test[i];
    const auto preds = predict(s.observed, k, rng);
    SampleMetrics m;
    m.sample_id = s.sample_id;
    m.apd = apd(preds);
    m.ade = ade(preds, s.future);
    m.fde = fde(preds, s.future);
    m.mmade = mmade(preds, mm.futures[i]);
    m.mmfde = mmfde(preds, mm.futures[i]);
    std::tie(m.ade_m, m.fde_m) = median_metrics(preds, s.future);
    m.modes = static_cast<double>(mode_coverage(data.config, s.phase, preds));
    rep.samples.push_back(m);
  }
  const double n = static_cast<double>(rep.samples.size());
  for (const auto& m : rep.samples) {
    rep.apd += m.apd / n;
    rep.ade += m.ade / n;
    rep.fde += m.fde / n;
    rep.mmade += m.mmade / n;
    rep.mmfde += m.mmfde / n;
    rep.ade_m += m.ade_m / n;
    rep.fde_m += m.fde_m / n;
    rep.mode_coverage += m.modes / n;
  }
  return rep;
}

namespace {
const char* kColumns = "apd,ade,fde,mmade,mmfde,ade_m,fde_m,modes";

std::string row(const MetricsReport& r) {
  return fmt(r.apd) + "," + fmt(r.ade) + "," + fmt(r.fde) + "," + fmt(r.mmade) + "," + fmt(r.mmfde) + "," +
         fmt(r.ade_m) + "," + fmt(r.fde_m) + "," + fmt(r.mode_coverage);
}
}  // namespace

void write_report_csv(std::ostream& os, const MetricsReport& r) {
  os << "method,k," << kColumns << "\n" << r.method << "," << r.k_used << "," << row(r) << "\n";
}

void write_samples_csv(std::ostream& os, const MetricsReport& r) {
  os << "sample_id," << kColumns << "\n";
  for (const auto& m : r.samples) {
    os << m.sample_id << "," << fmt(m.apd) << "," << fmt(m.ade) << "," << fmt(m.fde) << "," << fmt(m.mmade) << ","
       << fmt(m.mmfde) << "," << fmt(m.ade_m) << "," << fmt(m.fde_m) << "," << fmt(m.modes) << "\n";
  }
}

void write_comparison_csv(std::ostream& os, const std::vector<MetricsReport>& reports) {
  os << "method," << kColumns << "\n";
  for (const auto& r : reports) os << r.method << "," << row(r) << "\n";
}

void write_table(std::ostream& os, const std::vector<MetricsReport>& reports) {
  const std::vector<std::string> heads{"method", "APD", "ADE", "FDE", "MMADE", "MMFDE", "ADE-m", "FDE-m", "modes"};
  char buf[64];
  for (const auto& h : heads) {
    std::snprintf(buf, sizeof buf, h == "method" ? "%-10s" : "%10s", h.c_str());
    os << buf;
  }
  os << "\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-10s", r.method.c_str());
    os << buf;
    for (double v : {r.apd, r.ade, r.fde, r.mmade, r.mmfde, r.ade_m, r.fde_m, r.mode_coverage}) {
      std::snprintf(buf, sizeof buf, "%10.4f", v);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace divsample
