#include "elmsc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "elmsc/errors.hpp"

namespace elmsc::metrics {

namespace {

void check_pair(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw ContractError("label length mismatch: " + std::to_string(predicted.size()) + " vs " +
                        std::to_string(truth.size()));
  if (predicted.empty()) throw ContractError("empty label vectors");
}

std::vector<int> compact(std::span<const int> labels, int& count) {
  std::map<int, int> ids;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = ids.emplace(l, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  count = static_cast<int>(ids.size());
  return out;
}

double pairs(long long m) { return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1); }

struct PairCounts {
  double both = 0.0;       // pairs together in both partitions
  double predicted = 0.0;  // pairs together in the prediction
  double truth = 0.0;      // pairs together in the truth
  double total = 0.0;
};

PairCounts pair_counts(std::span<const int> predicted, std::span<const int> truth) {
  const auto table = contingency(predicted, truth);
  PairCounts pc;
  std::vector<long long> col_sums(table.empty() ? 0 : table.front().size(), 0);
  for (const auto& row : table) {
    long long row_sum = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      pc.both += pairs(row[j]);
      row_sum += row[j];
      col_sums[j] += row[j];
    }
    pc.predicted += pairs(row_sum);
  }
  for (long long s : col_sums) pc.truth += pairs(s);
  pc.total = pairs(static_cast<long long>(predicted.size()));
  return pc;
}

}  // namespace

std::string Summary::formatted() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f", 100.0 * mean, 100.0 * std);
  return buf;
}

std::vector<std::vector<long long>> contingency(std::span<const int> predicted,
                                                std::span<const int> truth) {
  check_pair(predicted, truth);
  int kp = 0, kt = 0;
  const auto p = compact(predicted, kp);
  const auto t = compact(truth, kt);
  std::vector<std::vector<long long>> table(static_cast<std::size_t>(kp),
                                            std::vector<long long>(static_cast<std::size_t>(kt), 0));
  for (std::size_t i = 0; i < p.size(); ++i)
    ++table[static_cast<std::size_t>(p[i])][static_cast<std::size_t>(t[i])];
  return table;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  // Shortest augmenting path Hungarian method on cost = -weight, 1-based.
  const int n = static_cast<int>(weight.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = -weight[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double acc(std::span<const int> predicted, std::span<const int> truth) {
  const auto table = contingency(predicted, truth);
  const std::size_t kp = table.size();
  const std::size_t kt = table.front().size();
  const std::size_t size = std::max(kp, kt);
  std::vector<std::vector<double>> weight(size, std::vector<double>(size, 0.0));
  for (std::size_t i = 0; i < kp; ++i)
    for (std::size_t j = 0; j < kt; ++j) weight[i][j] = static_cast<double>(table[i][j]);
  const auto assignment = max_weight_assignment(weight);
  long long matched = 0;
  for (std::size_t i = 0; i < kp; ++i)
    if (assignment[i] >= 0 && static_cast<std::size_t>(assignment[i]) < kt)
      matched += table[i][static_cast<std::size_t>(assignment[i])];
  return static_cast<double>(matched) / static_cast<double>(predicted.size());
}

double nmi(std::span<const int> predicted, std::span<const int> truth) {
  const auto table = contingency(predicted, truth);
  const double n = static_cast<double>(predicted.size());
  std::vector<double> row(table.size(), 0.0), col(table.front().size(), 0.0);
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      row[i] += static_cast<double>(table[i][j]);
      col[j] += static_cast<double>(table[i][j]);
    }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0.0) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hp = entropy(row);
  const double ht = entropy(col);
  if (hp + ht == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i)
    for (std::size_t j = 0; j < table[i].size(); ++j) {
      const double c = static_cast<double>(table[i][j]);
      if (c > 0.0) mi += (c / n) * std::log(c * n / (row[i] * col[j]));
    }
  return std::clamp(2.0 * mi / (hp + ht), 0.0, 1.0);
}

double ari(std::span<const int> predicted, std::span<const int> truth) {
  const PairCounts pc = pair_counts(predicted, truth);
  if (pc.total == 0.0) return 1.0;
  const double expected = pc.predicted * pc.truth / pc.total;
  const double max_index = 0.5 * (pc.predicted + pc.truth);
  if (max_index == expected) return 1.0;
  return (pc.both - expected) / (max_index - expected);
}

double pairwise_f1(std::span<const int> predicted, std::span<const int> truth) {
  const PairCounts pc = pair_counts(predicted, truth);
  if (pc.predicted == 0.0 && pc.truth == 0.0) return 1.0;
  // Harmonic mean of both/predicted and both/truth.
  return 2.0 * pc.both / (pc.predicted + pc.truth);
}

MetricTuple evaluate(std::span<const int> predicted, std::span<const int> truth) {
  return {acc(predicted, truth), nmi(predicted, truth), ari(predicted, truth),
          pairwise_f1(predicted, truth)};
}

EvalReport aggregate_trials(std::vector<MetricTuple> trials) {
  if (trials.empty()) throw ContractError("aggregate_trials: no trials");
  auto summarize = [&](double MetricTuple::*field) {
    const double count = static_cast<double>(trials.size());
    double mean = 0.0;
    for (const auto& t : trials) mean += t.*field;
    mean /= count;
    double ss = 0.0;
    for (const auto& t : trials) ss += (t.*field - mean) * (t.*field - mean);
    return Summary{mean, trials.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0};
  };
  EvalReport out;
  out.acc = summarize(&MetricTuple::acc);
  out.nmi = summarize(&MetricTuple::nmi);
  out.ari = summarize(&MetricTuple::ari);
  out.f1 = summarize(&MetricTuple::f1);
  out.trials = std::move(trials);
  return out;
}

}  // namespace elmsc::metrics
