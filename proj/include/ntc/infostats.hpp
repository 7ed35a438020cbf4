#pragma once

// Exact plug-in information measures and the distances used by
// topographic similarity. All logarithms are base 2.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace ntc {

/// Dense co-occurrence table: rows index values of A, columns values of B.
class JointCounts {
public:
    JointCounts(std::size_t rows, std::size_t cols);

    /// Builds the joint of two equally long value sequences. Values are used
    /// directly as row/column indices, so they should be compact.
    static JointCounts from_pairs(std::span<const std::size_t> a, std::span<const std::size_t> b);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t total() const { return total_; }

    std::size_t operator()(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }
    void add(std::size_t r, std::size_t c, std::size_t n = 1);

    std::vector<std::size_t> row_marginal() const;
    std::vector<std::size_t> col_marginal() const;
    std::span<const std::size_t> cells() const { return cells_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t total_ = 0;
    std::vector<std::size_t> cells_;
};

/// Throws std::invalid_argument when every count is zero.
double entropy(std::span<const std::size_t> counts);

/// Entropy of the empirical distribution of a value sequence.
double entropy_of(std::span<const std::size_t> values);

/// I(A;B) = H(A) + H(B) - H(A,B), clamped at zero. Throws on an empty joint.
double mutual_information(const JointCounts& joint);

/// Spearman rank correlation with average ranks for ties. Returns nullopt when
/// either rank vector is constant. Throws on length mismatch or fewer than two
/// observations.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

/// Average (tied) ranks, 1-based.
std::vector<double> average_ranks(std::span<const double> xs);

/// Unit-cost edit distance.
std::size_t levenshtein(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// Positions at which equally long tuples differ. Throws on length mismatch.
std::size_t hamming(std::span<const std::size_t> a, std::span<const std::size_t> b);

}  // namespace ntc
