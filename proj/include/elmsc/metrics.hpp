#pragma once

#include <span>
#include <string>
#include <vector>

namespace elmsc::metrics {

struct MetricTuple {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double f1 = 0.0;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single trial

  /// "mean±std" in percent with two decimals, e.g. "95.00±7.07".
  std::string formatted() const;
};

struct EvalReport {
  std::vector<MetricTuple> trials;
  Summary acc, nmi, ari, f1;
};

/// Contingency counts: rows index predicted clusters, columns true clusters,
/// after compacting both label sets to 0..k-1 in order of first appearance.
std::vector<std::vector<long long>> contingency(std::span<const int> predicted,
                                                std::span<const int> truth);

/// Best-match accuracy under an optimal one-to-one cluster mapping
/// (Hungarian assignment on the zero-padded confusion matrix).
double acc(std::span<const int> predicted, std::span<const int> truth);

/// Mutual information normalized by the arithmetic mean of the entropies.
/// Two single-cluster partitions score 1.
double nmi(std::span<const int> predicted, std::span<const int> truth);

/// Adjusted Rand index (permutation model). Returns 1 when both partitions
/// are trivial in the same way (all singletons or one cluster).
double ari(std::span<const int> predicted, std::span<const int> truth);

/// F1 over co-clustered sample pairs. Scores 1 when neither partition has a
/// co-clustered pair.
double pairwise_f1(std::span<const int> predicted, std::span<const int> truth);

MetricTuple evaluate(std::span<const int> predicted, std::span<const int> truth);

/// Mean and sample standard deviation of each metric over the trials.
EvalReport aggregate_trials(std::vector<MetricTuple> trials);

/// Maximum-weight perfect assignment on a square matrix; returns the column
/// chosen for each row.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

}  // namespace elmsc::metrics
