#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace rcrf::detail {

// Sum of M slots maintained as a fixed pairwise reduction tree, so the total
// depends only on the current slot values (never on update history).
class PairwiseSum {
 public:
  explicit PairwiseSum(std::size_t n) { resize(n); }

  void resize(std::size_t n) {
    leaves_ = 1;
    while (leaves_ < n) leaves_ *= 2;
    tree_.assign(2 * leaves_, 0.0);
  }
  void set(std::size_t i, double v) {
    std::size_t k = leaves_ + i;
    tree_[k] = v;
    for (k /= 2; k >= 1; k /= 2) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
  }
  /// Sets the first values.size() slots, zeroes the rest, and rebuilds.
  void assign(const std::vector<double>& values) {
    std::fill(tree_.begin() + static_cast<std::ptrdiff_t>(leaves_), tree_.end(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) tree_[leaves_ + i] = values[i];
    for (std::size_t k = leaves_ - 1; k >= 1; --k) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
  }
  double total() const { return tree_[1]; }

 private:
  std::size_t leaves_ = 1;
  std::vector<double> tree_;
};

}  // namespace rcrf::detail
