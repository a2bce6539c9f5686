#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "asl/platform.hpp"

namespace asl::harness {

struct CdfPoint {
  std::uint64_t latency_ns = 0;
  double fraction = 0.0;
  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Nearest-rank percentile: sorted[ceil(p/100 * n)] (1-indexed).
/// `sorted` must be ascending.
inline std::uint64_t percentile_sorted(const std::vector<std::uint64_t>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample set");
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile must be in (0, 100]");
  double exact = p / 100.0 * static_cast<double>(sorted.size());
  // Guard against 0.99 * 100 landing a hair above 99.
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

/// Full-log latency store, one sample set per core class.
class LatencyRecorder {
 public:
  void add(CoreClass cls, std::uint64_t latency_ns) {
    samples_[idx(cls)].push_back(latency_ns);
    sorted_ = false;
  }

  void merge(const LatencyRecorder& other) {
    for (int c = 0; c < 2; ++c) {
      samples_[c].insert(samples_[c].end(), other.samples_[c].begin(), other.samples_[c].end());
    }
    sorted_ = false;
  }

  std::size_t count(CoreClass cls) const noexcept { return samples_[idx(cls)].size(); }
  std::size_t count() const noexcept { return samples_[0].size() + samples_[1].size(); }

  std::uint64_t percentile(CoreClass cls, double p) {
    sort();
    return percentile_sorted(samples_[idx(cls)], p);
  }

  std::uint64_t percentile(double p) {
    sort();
    return percentile_sorted(overall_, p);
  }

  double mean(CoreClass cls) const { return mean_of(samples_[idx(cls)]); }
  double mean() const {
    std::size_t n = count();
    if (n == 0) return 0.0;
    return (mean_of(samples_[0]) * static_cast<double>(samples_[0].size()) +
            mean_of(samples_[1]) * static_cast<double>(samples_[1].size())) /
           static_cast<double>(n);
  }

  // Fraction of samples strictly above `threshold_ns`.
  double fraction_above(std::uint64_t threshold_ns) const {
    std::size_t n = count();
    if (n == 0) return 0.0;
    std::size_t above = 0;
    for (auto& s : samples_) {
      for (auto v : s) above += v > threshold_ns;
    }
    return static_cast<double>(above) / static_cast<double>(n);
  }

  // `points` evenly spaced cumulative fractions; the last one is 1.0.
  std::vector<CdfPoint> cdf(CoreClass cls, int points = 100) {
    sort();
    return cdf_of(samples_[idx(cls)], points);
  }
  std::vector<CdfPoint> cdf(int points = 100) {
    sort();
    return cdf_of(overall_, points);
  }

  const std::vector<std::uint64_t>& samples(CoreClass cls) const { return samples_[idx(cls)]; }

 private:
  static int idx(CoreClass c) noexcept { return static_cast<int>(c); }

  static double mean_of(const std::vector<std::uint64_t>& v) {
    if (v.empty()) return 0.0;
    long double sum = 0;
    for (auto x : v) sum += x;
    return static_cast<double>(sum / static_cast<long double>(v.size()));
  }

  static std::vector<CdfPoint> cdf_of(const std::vector<std::uint64_t>& sorted, int points) {
    std::vector<CdfPoint> out;
    if (sorted.empty() || points <= 0) return out;
    out.reserve(static_cast<std::size_t>(points));
    for (int k = 1; k <= points; ++k) {
      double f = static_cast<double>(k) / points;
      out.push_back({percentile_sorted(sorted, f * 100.0), k == points ? 1.0 : f});
    }
    return out;
  }

  void sort() {
    if (sorted_) return;
    overall_.clear();
    for (auto& s : samples_) {
      std::sort(s.begin(), s.end());
      overall_.insert(overall_.end(), s.begin(), s.end());
    }
    std::sort(overall_.begin(), overall_.end());
    sorted_ = true;
  }

  std::vector<std::uint64_t> samples_[2];
  std::vector<std::uint64_t> overall_;
  bool sorted_ = false;
};

}  // namespace asl::harness
