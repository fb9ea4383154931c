#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dirlink {

/// All fields are percentages in [0, 100].
struct MetricsReport {
  double hits20 = 0;
  double hits50 = 0;
  double hits100 = 0;
  double mrr = 0;
  double auc = 0;
  double ap = 0;
  double acc = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Each positive is ranked against the shared negative pool; a tied negative
/// counts as ranked above the positive. Inputs must be nonempty.
double hits_at_k(std::span<const double> pos, std::span<const double> neg, std::size_t k);
double mrr(std::span<const double> pos, std::span<const double> neg);
/// Mann-Whitney statistic with ties worth one half.
double auc(std::span<const double> pos, std::span<const double> neg);
/// Sum of (R_i - R_{i-1}) P_i over distinct score thresholds, highest first.
double average_precision(std::span<const double> pos, std::span<const double> neg);
/// Positive prediction iff logit > `threshold` (0 means sigmoid > 0.5).
double accuracy(std::span<const double> pos, std::span<const double> neg, double threshold = 0.0);

MetricsReport compute_metrics(std::span<const double> pos, std::span<const double> neg);

/// Field access by name for tables: hits20, hits50, hits100, mrr, auc, ap, acc.
inline constexpr const char* kMetricNames[] = {"hits20", "hits50", "hits100", "mrr", "auc", "ap", "acc"};
std::vector<double> as_vector(const MetricsReport& r);

struct Summary {
  double mean = 0;
  double std = 0;  // sample standard deviation; 0 for a single value
};

Summary summarize(std::span<const double> values);

}  // namespace dirlink
