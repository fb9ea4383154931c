#include "dirlink/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dirlink {

namespace {

void require_nonempty(std::span<const double> pos, std::span<const double> neg, const char* what) {
  if (pos.empty() || neg.empty())
    throw std::invalid_argument(std::string(what) + ": positive and negative scores must be nonempty");
}

/// Pessimistic 1-based rank of each positive: 1 + #{neg >= p}.
std::vector<std::size_t> ranks(std::span<const double> pos, std::span<const double> neg) {
  std::vector<double> sorted(neg.begin(), neg.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> out(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), pos[i]) - sorted.begin();
    out[i] = 1 + (sorted.size() - static_cast<std::size_t>(below));
  }
  return out;
}

}  // namespace

double hits_at_k(std::span<const double> pos, std::span<const double> neg, std::size_t k) {
  require_nonempty(pos, neg, "hits_at_k");
  if (k == 0) throw std::invalid_argument("hits_at_k: k must be at least 1");
  std::size_t hits = 0;
  for (auto r : ranks(pos, neg)) hits += r <= k;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(pos.size());
}

double mrr(std::span<const double> pos, std::span<const double> neg) {
  require_nonempty(pos, neg, "mrr");
  double total = 0.0;
  for (auto r : ranks(pos, neg)) total += 1.0 / static_cast<double>(r);
  return 100.0 * total / static_cast<double>(pos.size());
}

double auc(std::span<const double> pos, std::span<const double> neg) {
  require_nonempty(pos, neg, "auc");
  std::vector<double> sorted(neg.begin(), neg.end());
  std::sort(sorted.begin(), sorted.end());
  // Twice the statistic keeps the half-credit for ties in integers.
  unsigned long long twice = 0;
  for (double p : pos) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), p);
    const auto hi = std::upper_bound(lo, sorted.end(), p);
    twice += 2ULL * static_cast<unsigned long long>(lo - sorted.begin()) +
             static_cast<unsigned long long>(hi - lo);
  }
  return 100.0 * static_cast<double>(twice) /
         (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double average_precision(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty()) throw std::invalid_argument("average_precision: no positive scores");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(pos.size() + neg.size());
  for (double s : pos) items.push_back({s, true});
  for (double s : neg) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });
  const double total_pos = static_cast<double>(pos.size());
  std::size_t tp = 0;
  std::size_t seen = 0;
  double prev_recall = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) {
      tp += items[j].positive;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    sum += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return 100.0 * sum;
}

double accuracy(std::span<const double> pos, std::span<const double> neg, double threshold) {
  require_nonempty(pos, neg, "accuracy");
  std::size_t correct = 0;
  for (double s : pos) correct += s > threshold;
  for (double s : neg) correct += !(s > threshold);
  return 100.0 * static_cast<double>(correct) / static_cast<double>(pos.size() + neg.size());
}

MetricsReport compute_metrics(std::span<const double> pos, std::span<const double> neg) {
  MetricsReport r;
  r.hits20 = hits_at_k(pos, neg, 20);
  r.hits50 = hits_at_k(pos, neg, 50);
  r.hits100 = hits_at_k(pos, neg, 100);
  r.mrr = mrr(pos, neg);
  r.auc = auc(pos, neg);
  r.ap = average_precision(pos, neg);
  r.acc = accuracy(pos, neg);
  return r;
}

std::vector<double> as_vector(const MetricsReport& r) {
  return {r.hits20, r.hits50, r.hits100, r.mrr, r.auc, r.ap, r.acc};
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  // Offsets from the first value keep identical inputs at exactly zero spread.
  double offset = 0.0;
  for (double v : values) offset += v - values[0];
  s.mean = values[0] + offset / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace dirlink
