#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmdpbench/layered.hpp"
#include "cmdpbench/rng.hpp"

namespace cmdpbench {

// Oblivious adversarial loss sequence: the whole schedule is a pure function
// of (kind, parameters, seed), fixed before episode 1. row(t) returns
// l_t in [0,1]^{|X x A|} for t in [1..T].
class LossSchedule {
 public:
  enum class Kind { FixedSequence, PiecewiseStationary, AbruptSwitching };

  static LossSchedule fixed_rows(std::vector<std::vector<double>> rows) {
    LossSchedule s;
    s.kind_ = Kind::FixedSequence;
    s.rows_ = std::move(rows);
    if (s.rows_.empty()) throw std::invalid_argument("loss schedule: no rows");
    s.check_range_(s.rows_);
    return s;
  }

  // Single row repeated every episode.
  static LossSchedule constant(std::vector<double> row) { return fixed_rows({std::move(row)}); }

  // One row of |X x A| decimals per episode; reused cyclically past the end.
  static LossSchedule from_file(const std::string& path, int num_pairs) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("loss schedule: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::vector<double> row;
      double v;
      while (ss >> v) row.push_back(v);
      if (static_cast<int>(row.size()) != num_pairs)
        throw std::invalid_argument("loss schedule row has wrong width in " + path);
      rows.push_back(std::move(row));
    }
    return fixed_rows(std::move(rows));
  }

  // A fresh uniform random row per segment of segment_length episodes.
  static LossSchedule piecewise_stationary(int num_pairs, int segment_length,
                                           std::uint64_t seed) {
    if (segment_length < 1) throw std::invalid_argument("segment_length must be >= 1");
    LossSchedule s;
    s.kind_ = Kind::PiecewiseStationary;
    s.num_pairs_ = num_pairs;
    s.period_ = segment_length;
    s.seed_ = seed;
    return s;
  }

  // Alternates between two random rows every period episodes.
  static LossSchedule abrupt_switching(int num_pairs, int period, std::uint64_t seed) {
    if (period < 1) throw std::invalid_argument("period must be >= 1");
    LossSchedule s;
    s.kind_ = Kind::AbruptSwitching;
    s.num_pairs_ = num_pairs;
    s.period_ = period;
    s.seed_ = seed;
    return s;
  }

  std::vector<double> row(long t) const {
    if (t < 1) throw std::invalid_argument("episode index must be >= 1");
    switch (kind_) {
      case Kind::FixedSequence:
        return rows_[static_cast<std::size_t>((t - 1) % static_cast<long>(rows_.size()))];
      case Kind::PiecewiseStationary:
        return random_row_((t - 1) / period_);
      case Kind::AbruptSwitching:
        return random_row_(((t - 1) / period_) % 2);
    }
    throw std::logic_error("unreachable");
  }

  // Entrywise average of rows 1..T, used by the offline baseline.
  std::vector<double> average(long T) const {
    std::vector<double> avg(row(1).size(), 0.0);
    for (long t = 1; t <= T; ++t) {
      auto r = row(t);
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += r[i];
    }
    for (double& v : avg) v /= static_cast<double>(T);
    return avg;
  }

  Kind kind() const { return kind_; }
  int period() const { return period_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::vector<double>>& fixed() const { return rows_; }

 private:
  std::vector<double> random_row_(long block) const {
    SplitRng rng = SplitRng::derive(seed_, static_cast<std::uint64_t>(block));
    std::vector<double> row(num_pairs_);
    for (double& v : row) v = rng.next_double();
    return row;
  }

  void check_range_(const std::vector<std::vector<double>>& rows) const {
    for (const auto& r : rows)
      for (double v : r)
        if (v < 0.0 || v > 1.0) throw std::invalid_argument("loss entry outside [0,1]");
  }

  Kind kind_ = Kind::FixedSequence;
  std::vector<std::vector<double>> rows_;
  int num_pairs_ = 0;
  int period_ = 1;
  std::uint64_t seed_ = 0;
};

}  // namespace cmdpbench
