#include "ntc/tre.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

#include "ntc/adam.hpp"
#include "ntc/protocols.hpp"

namespace ntc {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct CompositionEntry {
    Composition composition;
    std::string_view name;
};

constexpr CompositionEntry kCompositionNames[] = {
    {Composition::additive, "additive"},
    {Composition::linear, "linear"},
    {Composition::nonlinear, "nonlinear"},
};

RowMatrix scatter_rows(const RowMatrix& rows, const std::vector<int>& index, Eigen::Index n) {
    RowMatrix out = RowMatrix::Zero(n, rows.cols());
    for (std::size_t r = 0; r < index.size(); ++r) out.row(index[r]) += rows.row(static_cast<Eigen::Index>(r));
    return out;
}

RowMatrix gather_sum(const RowMatrix& left, const std::vector<int>& li, const RowMatrix& right,
                     const std::vector<int>& ri) {
    RowMatrix out(static_cast<Eigen::Index>(li.size()), left.cols());
    for (std::size_t r = 0; r < li.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = left.row(li[r]) + right.row(ri[r]);
    }
    return out;
}

struct OpState {
    RowMatrix out;
    RowMatrix hidden;  // tanh activations, nonlinear only
};

// Forward pass of one batched composition.
OpState forward_op(const TreParams& p, const RowMatrix& src_left, const std::vector<int>& li,
                   const RowMatrix& src_right, const std::vector<int>& ri) {
    OpState st;
    switch (p.kind()) {
    case Composition::additive:
        st.out = gather_sum(src_left, li, src_right, ri);
        break;
    case Composition::linear: {
        const RowMatrix pl = src_left * p.a().transpose();
        const RowMatrix pr = src_right * p.b().transpose();
        st.out = gather_sum(pl, li, pr, ri);
        break;
    }
    case Composition::nonlinear: {
        const RowMatrix zl = src_left * p.w11().transpose();
        const RowMatrix zr = src_right * p.w12().transpose();
        RowMatrix z = gather_sum(zl, li, zr, ri);
        z.rowwise() += p.b1().transpose();
        st.hidden = z.array().tanh().matrix();
        st.out = st.hidden * p.w2().transpose();
        st.out.rowwise() += p.b2().transpose();
        break;
    }
    }
    return st;
}

// Accumulates parameter gradients into `g` and operand gradients into d_left / d_right.
void backward_op(const TreParams& p, TreParams& g, const OpState& st, const RowMatrix& d_out,
                 const RowMatrix& src_left, const std::vector<int>& li, const RowMatrix& src_right,
                 const std::vector<int>& ri, RowMatrix& d_left, RowMatrix& d_right) {
    switch (p.kind()) {
    case Composition::additive:
        d_left += scatter_rows(d_out, li, src_left.rows());
        d_right += scatter_rows(d_out, ri, src_right.rows());
        break;
    case Composition::linear: {
        const RowMatrix dl = scatter_rows(d_out, li, src_left.rows());
        const RowMatrix dr = scatter_rows(d_out, ri, src_right.rows());
        g.a().noalias() += dl.transpose() * src_left;
        g.b().noalias() += dr.transpose() * src_right;
        d_left.noalias() += dl * p.a();
        d_right.noalias() += dr * p.b();
        break;
    }
    case Composition::nonlinear: {
        g.w2().noalias() += d_out.transpose() * st.hidden;
        g.b2() += d_out.colwise().sum().transpose();
        const RowMatrix d_hidden = d_out * p.w2();
        const RowMatrix dz = (d_hidden.array() * (1.0 - st.hidden.array().square())).matrix();
        g.b1() += dz.colwise().sum().transpose();
        const RowMatrix dl = scatter_rows(dz, li, src_left.rows());
        const RowMatrix dr = scatter_rows(dz, ri, src_right.rows());
        g.w11().noalias() += dl.transpose() * src_left;
        g.w12().noalias() += dr.transpose() * src_right;
        d_left.noalias() += dl * p.w11();
        d_right.noalias() += dr * p.w12();
        break;
    }
    }
}

std::size_t flat_size(Composition kind, std::size_t n_concepts, std::size_t dim, std::size_t hidden) {
    switch (kind) {
    case Composition::additive: return n_concepts * dim;
    case Composition::linear: return n_concepts * dim + 2 * dim * dim;
    case Composition::nonlinear: return n_concepts * dim + 2 * hidden * dim + hidden + dim * hidden + dim;
    }
    return 0;
}

}  // namespace

std::string_view composition_name(Composition c) {
    for (const auto& e : kCompositionNames) {
        if (e.composition == c) return e.name;
    }
    return "?";
}

std::optional<Composition> parse_composition(std::string_view name) {
    for (const auto& e : kCompositionNames) {
        if (e.name == name) return e.composition;
    }
    return std::nullopt;
}

TreGeometry tre_geometry(const Protocol& protocol, bool pad_variable_length) {
    TreGeometry g;
    g.length = protocol.max_len();
    g.padded = pad_variable_length && !protocol.fixed_length();
    if (!protocol.fixed_length() && !pad_variable_length) {
        throw std::invalid_argument("variable-length protocol needs PAD targets for TRE");
    }
    g.width = protocol.alphabet().size() + (g.padded ? 1 : 0);
    return g;
}

TreParams::TreParams(Composition kind, std::size_t n_concepts, std::size_t dim, std::size_t hidden)
    : kind_(kind), n_concepts_(n_concepts), dim_(dim), hidden_(kind == Composition::nonlinear ? hidden : 0) {
    if (dim == 0 || n_concepts == 0) throw std::invalid_argument("TRE parameters need positive sizes");
    if (kind == Composition::nonlinear && hidden == 0) {
        throw std::invalid_argument("nonlinear composition needs a hidden layer");
    }
    std::size_t off = n_concepts * dim;
    if (kind == Composition::linear) {
        off_a_ = off;
        off_b_ = off + dim * dim;
    } else if (kind == Composition::nonlinear) {
        off_w11_ = off;
        off_w12_ = off_w11_ + hidden_ * dim;
        off_b1_ = off_w12_ + hidden_ * dim;
        off_w2_ = off_b1_ + hidden_;
        off_b2_ = off_w2_ + dim * hidden_;
    }
    values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(flat_size(kind, n_concepts, dim, hidden_)));
}

TreParams TreParams::standard_normal(Composition kind, std::size_t n_concepts, std::size_t dim,
                                     std::size_t hidden, std::uint64_t seed) {
    TreParams p(kind, n_concepts, dim, hidden);
    auto rng = protocol_rng(seed, "tre-init");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < p.values_.size(); ++i) p.values_[i] = normal(rng);
    return p;
}

TreParams TreParams::like(Eigen::VectorXd values) const {
    if (values.size() != values_.size()) throw std::invalid_argument("parameter buffer size mismatch");
    TreParams p = *this;
    p.values_ = std::move(values);
    return p;
}

TreParams::MatrixView TreParams::matrix(std::size_t offset, std::size_t rows, std::size_t cols) {
    return MatrixView(values_.data() + offset, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

TreParams::ConstMatrixView TreParams::matrix(std::size_t offset, std::size_t rows, std::size_t cols) const {
    return ConstMatrixView(values_.data() + offset, static_cast<Eigen::Index>(rows),
                           static_cast<Eigen::Index>(cols));
}

TreParams::VectorView TreParams::vector(std::size_t offset, std::size_t n) {
    return VectorView(values_.data() + offset, static_cast<Eigen::Index>(n));
}

TreParams::ConstVectorView TreParams::vector(std::size_t offset, std::size_t n) const {
    return ConstVectorView(values_.data() + offset, static_cast<Eigen::Index>(n));
}

Eigen::VectorXd compose(const TreParams& params, const Eigen::VectorXd& left,
                        const Eigen::VectorXd& right) {
    const auto dim = static_cast<Eigen::Index>(params.dim());
    if (left.size() != dim || right.size() != dim) {
        throw std::invalid_argument("compose: operand dimension does not match the parameters");
    }
    switch (params.kind()) {
    case Composition::additive: return left + right;
    case Composition::linear: return params.a() * left + params.b() * right;
    case Composition::nonlinear: {
        const Eigen::VectorXd h =
            (params.w11() * left + params.w12() * right + params.b1()).array().tanh().matrix();
        return params.w2() * h + params.b2();
    }
    }
    throw std::logic_error("unknown composition");
}

Eigen::MatrixXd reconstruct(const Protocol& protocol, const Derivation& d, const TreParams& params,
                            const ComposeObserver& observer) {
    const std::size_t length = protocol.max_len();
    if (params.dim() % length != 0) throw std::invalid_argument("parameter dim is not a multiple of L");
    if (params.n_concepts() != protocol.space().size()) {
        throw std::invalid_argument("parameters were built for a different concept space");
    }
    const std::size_t width = params.dim() / length;

    std::function<Eigen::VectorXd(const Derivation&)> encode = [&](const Derivation& node) -> Eigen::VectorXd {
        if (node.is_leaf()) {
            const auto id = protocol.space().global_id(node.leaf_concept());
            return params.embeddings().row(static_cast<Eigen::Index>(id)).transpose();
        }
        const Eigen::VectorXd left = encode(node.left());
        const Eigen::VectorXd right = encode(node.right());
        if (observer) observer(left, right);
        return compose(params, left, right);
    };
    const Eigen::VectorXd flat = encode(d);

    Eigen::MatrixXd blocks(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(width));
    for (std::size_t b = 0; b < length; ++b) {
        blocks.row(static_cast<Eigen::Index>(b)) =
            flat.segment(static_cast<Eigen::Index>(b * width), static_cast<Eigen::Index>(width)).transpose();
    }
    return blocks;
}

double message_cross_entropy(const Eigen::MatrixXd& block_logits, std::span<const std::size_t> targets) {
    if (static_cast<std::size_t>(block_logits.rows()) != targets.size()) {
        throw std::invalid_argument("one target per block required");
    }
    double loss = 0.0;
    for (Eigen::Index b = 0; b < block_logits.rows(); ++b) {
        const auto row = block_logits.row(b);
        const double m = row.maxCoeff();
        const double lse = m + std::log((row.array() - m).exp().sum());
        loss += lse - row(static_cast<Eigen::Index>(targets[static_cast<std::size_t>(b)]));
    }
    return loss;
}

std::vector<std::vector<std::size_t>> tre_targets(const Protocol& protocol, const TreGeometry& geometry) {
    std::vector<std::vector<std::size_t>> out;
    out.reserve(protocol.size());
    for (const auto& m : protocol.messages()) {
        auto t = m;
        t.resize(geometry.length, geometry.pad_class());
        out.push_back(std::move(t));
    }
    return out;
}

TreProblem::TreProblem(const Protocol& protocol, bool pad_variable_length)
    : geometry_(tre_geometry(protocol, pad_variable_length)),
      n_concepts_(protocol.space().size()),
      targets_(tre_targets(protocol, geometry_)) {
    const auto& space = protocol.space();
    if (protocol.shape() == DerivationShape::standard) {
        PairOp op;
        for (std::size_t i = 0; i < protocol.size(); ++i) {
            op.left.push_back(static_cast<int>(protocol.concept_ids(i)[0]));
            op.right.push_back(static_cast<int>(protocol.concept_ids(i)[1]));
        }
        plan_.push_back(std::move(op));
        return;
    }
    // Inner (colour, shape) compositions are shared by all three contexts.
    const std::size_t ns = space.n_shapes();
    PairOp inner;
    for (std::size_t c = 0; c < space.n_colours(); ++c) {
        for (std::size_t s = 0; s < ns; ++s) {
            inner.left.push_back(static_cast<int>(space.global_id(space.colours()[c])));
            inner.right.push_back(static_cast<int>(space.global_id(space.shapes()[s])));
        }
    }
    PairOp outer;
    outer.right_from_previous = true;
    for (std::size_t i = 0; i < protocol.size(); ++i) {
        const auto& t = protocol.tuple(i);
        outer.left.push_back(static_cast<int>(protocol.concept_ids(i)[0]));
        outer.right.push_back(static_cast<int>(t[1] * ns + t[2]));
    }
    plan_.push_back(std::move(inner));
    plan_.push_back(std::move(outer));
}

Eigen::MatrixXd TreProblem::logits(const TreParams& params) const {
    const RowMatrix embeddings = params.embeddings();
    RowMatrix previous;
    for (const auto& op : plan_) {
        const RowMatrix& right = op.right_from_previous ? previous : embeddings;
        previous = forward_op(params, embeddings, op.left, right, op.right).out;
    }
    return previous;
}

TreEvaluation TreProblem::evaluate(const TreParams& params, double weight_decay,
                                   Eigen::VectorXd* gradient) const {
    if (params.n_concepts() != n_concepts_ || params.dim() != geometry_.dim()) {
        throw std::invalid_argument("parameters do not match the protocol geometry");
    }
    const RowMatrix embeddings = params.embeddings();
    std::vector<OpState> states;
    states.reserve(plan_.size());
    for (const auto& op : plan_) {
        const RowMatrix& right = op.right_from_previous ? states.back().out : embeddings;
        states.push_back(forward_op(params, embeddings, op.left, right, op.right));
    }
    const RowMatrix& logits = states.back().out;

    const auto n = static_cast<double>(targets_.size());
    const auto width = static_cast<Eigen::Index>(geometry_.width);
    RowMatrix d_logits;
    if (gradient) d_logits.resize(logits.rows(), logits.cols());
    double loss = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const auto& target = targets_[static_cast<std::size_t>(r)];
        for (std::size_t b = 0; b < geometry_.length; ++b) {
            const auto off = static_cast<Eigen::Index>(b) * width;
            const auto block = logits.row(r).segment(off, width);
            const double m = block.maxCoeff();
            const Eigen::ArrayXd e = (block.array() - m).exp().transpose();
            const double z = e.sum();
            const auto t = static_cast<Eigen::Index>(target[b]);
            loss += m + std::log(z) - block(t);
            if (gradient) {
                d_logits.row(r).segment(off, width) = (e / (z * n)).matrix().transpose();
                d_logits(r, off + t) -= 1.0 / n;
            }
        }
    }
    loss /= n;

    TreEvaluation eval;
    eval.loss = loss;
    eval.objective = loss + weight_decay * params.values().squaredNorm();
    if (!gradient) return eval;

    TreParams g = params.like(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.size())));
    RowMatrix d_embeddings = RowMatrix::Zero(embeddings.rows(), embeddings.cols());
    RowMatrix d_out = std::move(d_logits);
    for (std::size_t k = plan_.size(); k-- > 0;) {
        const auto& op = plan_[k];
        if (op.right_from_previous) {
            const RowMatrix& right = states[k - 1].out;
            RowMatrix d_previous = RowMatrix::Zero(right.rows(), right.cols());
            backward_op(params, g, states[k], d_out, embeddings, op.left, right, op.right,
                        d_embeddings, d_previous);
            d_out = std::move(d_previous);
        } else {
            backward_op(params, g, states[k], d_out, embeddings, op.left, embeddings, op.right,
                        d_embeddings, d_embeddings);
        }
    }
    g.embeddings() += d_embeddings;
    *gradient = g.values() + 2.0 * weight_decay * params.values();
    return eval;
}

double tre_loss(const Protocol& protocol, const TreParams& params, bool pad_variable_length) {
    return TreProblem(protocol, pad_variable_length).evaluate(params, 0.0).loss;
}

TreResult tre_fit(const Protocol& protocol, const TreConfig& config) {
    if (config.epochs == 0) throw std::invalid_argument("TRE needs at least one epoch");
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("TRE learning rate must be positive");
    if (config.weight_decay < 0.0) throw std::invalid_argument("TRE weight decay must be non-negative");

    const TreProblem problem(protocol, config.pad_variable_length);
    TreResult result{0.0, {},
                     TreParams::standard_normal(config.composition, problem.n_concepts(),
                                                problem.geometry().dim(), config.hidden, config.seed)};
    Adam adam(result.params.size(), config.learning_rate);
    Eigen::VectorXd grad;
    result.loss_curve.reserve(config.epochs);

    auto check = [&](double loss, std::size_t epoch) {
        if (!std::isfinite(loss)) {
            throw std::runtime_error("TRE diverged on " + protocol.name() + " (" +
                                     std::string(composition_name(config.composition)) +
                                     ") at epoch " + std::to_string(epoch));
        }
    };

    // Each iteration records the loss left by the previous update.
    auto eval = problem.evaluate(result.params, config.weight_decay, &grad);
    check(eval.loss, 0);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        adam.step(result.params.values(), grad);
        if (epoch < config.epochs) {
            eval = problem.evaluate(result.params, config.weight_decay, &grad);
        } else {
            eval = problem.evaluate(result.params, config.weight_decay);
        }
        check(eval.loss, epoch);
        result.loss_curve.push_back(eval.loss);
    }
    result.tre = result.loss_curve.back();
    return result;
}

void write_loss_curve(const TreResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write loss curve to " + path);
    out << "epoch,loss\n" << std::setprecision(9);
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        out << (i + 1) << ',' << result.loss_curve[i] << '\n';
    }
}

double grad_check(const Protocol& protocol, Composition kind, std::uint64_t seed, double weight_decay,
                  std::size_t hidden) {
    const TreProblem problem(protocol);
    TreParams params = TreParams::standard_normal(kind, problem.n_concepts(), problem.geometry().dim(),
                                                  hidden, seed);
    Eigen::VectorXd analytic;
    problem.evaluate(params, weight_decay, &analytic);

    constexpr double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < params.values().size(); ++i) {
        const double saved = params.values()[i];
        params.values()[i] = saved + h;
        const double up = problem.evaluate(params, weight_decay).objective;
        params.values()[i] = saved - h;
        const double down = problem.evaluate(params, weight_decay).objective;
        params.values()[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
    return worst;
}

double grad_check(Composition kind, std::uint64_t seed) {
    ProtocolConfig config;
    config.space = build_concept_space(2, 1, false);
    config.seed = seed;
    config.family = Family::random;
    config.alphabet_size = 3;
    return grad_check(gen_random(config), kind, seed);
}

}  // namespace ntc
