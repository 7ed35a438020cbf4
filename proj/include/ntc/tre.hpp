#pragma once

// Tree reconstruction error: fit concept embeddings and a composition
// function so that composing along each derivation tree reproduces the
// protocol's messages, and report the residual cross-entropy.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ntc/core.hpp"

namespace ntc {

enum class Composition { additive, linear, nonlinear };

inline constexpr Composition kAllCompositions[] = {Composition::additive, Composition::linear,
                                                   Composition::nonlinear};

std::string_view composition_name(Composition c);
std::optional<Composition> parse_composition(std::string_view name);

struct TreConfig {
    Composition composition = Composition::linear;
    std::size_t epochs = 1000;
    double learning_rate = 1e-1;
    double weight_decay = 1e-5;
    std::size_t hidden = 50;  // nonlinear only
    std::uint64_t seed = 0;
    /// Append a PAD class to every block when messages vary in length.
    /// Fixed-length protocols never get a PAD class.
    bool pad_variable_length = true;
};

/// Block layout of a reconstruction: `length` blocks of `width` logits.
struct TreGeometry {
    std::size_t length = 0;
    std::size_t width = 0;
    bool padded = false;

    std::size_t dim() const { return length * width; }
    std::size_t pad_class() const { return width - 1; }  // meaningful only when padded
};

TreGeometry tre_geometry(const Protocol& protocol, bool pad_variable_length = true);

/// All trainable values in one flat vector, with typed views into it.
///
/// Layout: concept embeddings (n_concepts x dim), then
///   linear:    A (dim x dim), B (dim x dim)
///   nonlinear: W11 (hidden x dim), W12 (hidden x dim), b1 (hidden),
///              W2 (dim x hidden), b2 (dim)
class TreParams {
public:
    using MatrixView = Eigen::Map<Eigen::MatrixXd>;
    using ConstMatrixView = Eigen::Map<const Eigen::MatrixXd>;
    using VectorView = Eigen::Map<Eigen::VectorXd>;
    using ConstVectorView = Eigen::Map<const Eigen::VectorXd>;

    TreParams(Composition kind, std::size_t n_concepts, std::size_t dim, std::size_t hidden = 0);

    /// Every entry drawn i.i.d. from N(0, 1).
    static TreParams standard_normal(Composition kind, std::size_t n_concepts, std::size_t dim,
                                     std::size_t hidden, std::uint64_t seed);

    Composition kind() const { return kind_; }
    std::size_t n_concepts() const { return n_concepts_; }
    std::size_t dim() const { return dim_; }
    std::size_t hidden() const { return hidden_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

    Eigen::VectorXd& values() { return values_; }
    const Eigen::VectorXd& values() const { return values_; }

    MatrixView embeddings() { return matrix(0, n_concepts_, dim_); }
    ConstMatrixView embeddings() const { return matrix(0, n_concepts_, dim_); }
    MatrixView a() { return matrix(off_a_, dim_, dim_); }
    ConstMatrixView a() const { return matrix(off_a_, dim_, dim_); }
    MatrixView b() { return matrix(off_b_, dim_, dim_); }
    ConstMatrixView b() const { return matrix(off_b_, dim_, dim_); }
    MatrixView w11() { return matrix(off_w11_, hidden_, dim_); }
    ConstMatrixView w11() const { return matrix(off_w11_, hidden_, dim_); }
    MatrixView w12() { return matrix(off_w12_, hidden_, dim_); }
    ConstMatrixView w12() const { return matrix(off_w12_, hidden_, dim_); }
    VectorView b1() { return vector(off_b1_, hidden_); }
    ConstVectorView b1() const { return vector(off_b1_, hidden_); }
    MatrixView w2() { return matrix(off_w2_, dim_, hidden_); }
    ConstMatrixView w2() const { return matrix(off_w2_, dim_, hidden_); }
    VectorView b2() { return vector(off_b2_, dim_); }
    ConstVectorView b2() const { return vector(off_b2_, dim_); }

    /// Same layout over an external buffer, e.g. a gradient vector.
    TreParams like(Eigen::VectorXd values) const;

private:
    MatrixView matrix(std::size_t offset, std::size_t rows, std::size_t cols);
    ConstMatrixView matrix(std::size_t offset, std::size_t rows, std::size_t cols) const;
    VectorView vector(std::size_t offset, std::size_t n);
    ConstVectorView vector(std::size_t offset, std::size_t n) const;

    Composition kind_;
    std::size_t n_concepts_;
    std::size_t dim_;
    std::size_t hidden_;
    std::size_t off_a_ = 0, off_b_ = 0;
    std::size_t off_w11_ = 0, off_w12_ = 0, off_b1_ = 0, off_w2_ = 0, off_b2_ = 0;
    Eigen::VectorXd values_;
};

/// Applies the composition to two dim-vectors. Throws on dimension mismatch.
Eigen::VectorXd compose(const TreParams& params, const Eigen::VectorXd& left,
                        const Eigen::VectorXd& right);

/// Called once per composition, bottom-up, with the two operands.
using ComposeObserver = std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

/// Reconstruction of one derivation as a (length x width) logit matrix.
/// Throws std::invalid_argument for concepts outside the protocol's space.
Eigen::MatrixXd reconstruct(const Protocol& protocol, const Derivation& d, const TreParams& params,
                            const ComposeObserver& observer = {});

/// Sum over blocks of cross-entropy(softmax(block), target). `targets` has
/// one class per row of `block_logits`.
double message_cross_entropy(const Eigen::MatrixXd& block_logits,
                             std::span<const std::size_t> targets);

/// Per-derivation target classes, PAD-extended to the geometry's length.
std::vector<std::vector<std::size_t>> tre_targets(const Protocol& protocol,
                                                  const TreGeometry& geometry);

struct TreEvaluation {
    double loss = 0.0;       // mean reconstruction cross-entropy
    double objective = 0.0;  // loss + weight_decay * ||params||^2
};

/// Batched evaluation over the whole protocol. Each distinct operand row is
/// transformed once and then gathered, so the context-sensitive protocol's
/// inner (colour, shape) compositions are shared across contexts.
class TreProblem {
public:
    explicit TreProblem(const Protocol& protocol, bool pad_variable_length = true);

    const TreGeometry& geometry() const { return geometry_; }
    std::size_t n_concepts() const { return n_concepts_; }
    std::size_t size() const { return targets_.size(); }

    /// Loss, objective and (optionally) the gradient of the objective.
    TreEvaluation evaluate(const TreParams& params, double weight_decay,
                           Eigen::VectorXd* gradient = nullptr) const;

    /// Logits for every derivation, one row each, in protocol entry order.
    Eigen::MatrixXd logits(const TreParams& params) const;

private:
    struct PairOp {
        bool right_from_previous = false;
        std::vector<int> left;
        std::vector<int> right;
    };

    TreGeometry geometry_;
    std::size_t n_concepts_ = 0;
    std::vector<PairOp> plan_;
    std::vector<std::vector<std::size_t>> targets_;
};

/// Mean reconstruction cross-entropy of `params`, without weight decay.
double tre_loss(const Protocol& protocol, const TreParams& params, bool pad_variable_length = true);

struct TreResult {
    double tre = 0.0;
    std::vector<double> loss_curve;  // mean loss after each epoch
    TreParams params;
};

/// Full-batch Adam on loss + weight_decay * ||params||^2. Throws
/// std::runtime_error if the loss becomes non-finite.
TreResult tre_fit(const Protocol& protocol, const TreConfig& config);

/// Writes "epoch,loss" rows.
void write_loss_curve(const TreResult& result, const std::string& path);

/// Max relative error between the analytic objective gradient and central
/// finite differences (step 1e-5) over every parameter.
double grad_check(const Protocol& protocol, Composition kind, std::uint64_t seed,
                  double weight_decay = 1e-2, std::size_t hidden = 4);

/// The same check on a 3-concept instance (2 colours, 1 shape, 3 symbols, N = 6).
double grad_check(Composition kind, std::uint64_t seed);

}  // namespace ntc
