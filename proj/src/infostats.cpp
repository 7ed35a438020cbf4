#include "ntc/infostats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ntc {

JointCounts::JointCounts(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), cells_(rows * cols, 0) {}

JointCounts JointCounts::from_pairs(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("joint: sequences differ in length");
    std::size_t rows = 0, cols = 0;
    for (auto v : a) rows = std::max(rows, v + 1);
    for (auto v : b) cols = std::max(cols, v + 1);
    JointCounts joint(rows, cols);
    for (std::size_t i = 0; i < a.size(); ++i) joint.add(a[i], b[i]);
    return joint;
}

void JointCounts::add(std::size_t r, std::size_t c, std::size_t n) {
    if (r >= rows_ || c >= cols_) throw std::out_of_range("joint cell out of range");
    cells_[r * cols_ + c] += n;
    total_ += n;
}

std::vector<std::size_t> JointCounts::row_marginal() const {
    std::vector<std::size_t> out(rows_, 0);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) out[r] += (*this)(r, c);
    }
    return out;
}

std::vector<std::size_t> JointCounts::col_marginal() const {
    std::vector<std::size_t> out(cols_, 0);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) out[c] += (*this)(r, c);
    }
    return out;
}

double entropy(std::span<const std::size_t> counts) {
    const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total == 0) throw std::invalid_argument("entropy of an all-zero count vector");
    const double n = static_cast<double>(total);
    double h = 0.0;
    for (auto k : counts) {
        if (k == 0) continue;
        const double p = static_cast<double>(k) / n;
        h -= p * std::log2(p);
    }
    return h;
}

double entropy_of(std::span<const std::size_t> values) {
    if (values.empty()) throw std::invalid_argument("entropy of an empty sequence");
    std::size_t n = 0;
    for (auto v : values) n = std::max(n, v + 1);
    std::vector<std::size_t> counts(n, 0);
    for (auto v : values) ++counts[v];
    return entropy(counts);
}

double mutual_information(const JointCounts& joint) {
    if (joint.total() == 0) throw std::invalid_argument("mutual information of an empty joint");
    const double mi = entropy(joint.row_marginal()) + entropy(joint.col_marginal()) -
                      entropy(joint.cells());
    return std::max(0.0, mi);
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("spearman: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("spearman: need at least two observations");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    // Mean of 1..n ranks, ties included.
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::size_t levenshtein(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::size_t hamming(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("hamming: tuples differ in length (mixed derivation shapes?)");
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

}  // namespace ntc
