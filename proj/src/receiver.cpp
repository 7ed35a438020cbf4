#include "ntc/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <stdexcept>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "ntc/adam.hpp"
#include "ntc/protocols.hpp"

namespace ntc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using MatrixView = Eigen::Map<MatrixXd>;
using ConstMatrixView = Eigen::Map<const MatrixXd>;
using ConstVectorView = Eigen::Map<const VectorXd>;

Index ix(std::size_t n) { return static_cast<Index>(n); }

// tanh through the vectorised exp; saturates cleanly at +-1.
template <typename Derived>
auto fast_tanh(const Eigen::ArrayBase<Derived>& x) {
    return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0);
}

// Saturated gates drive some Adam moments into the subnormal range, which is
// slow on x86; flush them to zero for the duration of a training run.
class FlushSubnormals {
public:
#if defined(__SSE__)
    FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
    ~FlushSubnormals() { _mm_setcsr(saved_); }

private:
    unsigned saved_;
#endif
};

void check_config(const ReceiverConfig& c) {
    if (c.embed_dim == 0 || c.recurrent_hidden == 0 || c.head_hidden == 0) {
        throw std::invalid_argument("receiver layer sizes must be positive");
    }
    if (!(c.learning_rate > 0.0)) throw std::invalid_argument("receiver learning rate must be positive");
    if (!(c.weight_decay >= 0.0)) throw std::invalid_argument("receiver weight decay must be non-negative");
    if (c.max_epochs == 0) throw std::invalid_argument("receiver max_epochs must be positive");
    if (c.batch_size == 0) throw std::invalid_argument("receiver batch size must be positive");
    if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) {
        throw std::invalid_argument("split ratio must lie in (0, 1)");
    }
}

}  // namespace

SplitDataset split(const Protocol& protocol, const ReceiverConfig& config) {
    check_config(config);
    const std::size_t n = protocol.size();
    if (n < 2) throw std::invalid_argument("protocol too small to split");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto rng = protocol_rng(config.seed, "receiver-split");
    std::shuffle(order.begin(), order.end(), rng);

    // The small slack keeps exact products such as 0.8 * 625 from rounding up.
    auto n_train = static_cast<std::size_t>(std::ceil(config.split_ratio * static_cast<double>(n) - 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

    SplitDataset out;
    out.seed = config.seed;
    for (auto c : protocol.slot_categories()) out.slot_sizes.push_back(protocol.space().category_size(c));
    for (std::size_t k = 0; k < n; ++k) {
        Example e{protocol.messages()[order[k]], protocol.tuple(order[k])};
        (k < n_train ? out.train : out.test).push_back(std::move(e));
    }
    return out;
}

struct Receiver::Forward {
    // Column t of x/gates/tanh_c is timestep t; c and h carry the initial
    // zero state in column 0, so step t reads column t and writes t + 1.
    // Gate rows are stacked (input, forget, cell, output), already activated.
    MatrixXd x, gates, c, h, tanh_c;
    VectorXd z1, a1, logits;
};

Receiver::Receiver(std::size_t alphabet_size, std::vector<std::size_t> slot_sizes,
                   const ReceiverConfig& config)
    : alphabet_size_(alphabet_size),
      slot_sizes_(std::move(slot_sizes)),
      embed_(config.embed_dim),
      hidden_(config.recurrent_hidden),
      head_(config.head_hidden) {
    check_config(config);
    if (alphabet_size_ == 0) throw std::invalid_argument("receiver needs a non-empty alphabet");
    if (slot_sizes_.empty()) throw std::invalid_argument("receiver needs at least one output slot");
    for (auto s : slot_sizes_) {
        if (s == 0) throw std::invalid_argument("output slots must be non-empty");
    }
    outputs_ = std::accumulate(slot_sizes_.begin(), slot_sizes_.end(), std::size_t{0});
    const std::size_t gates = 4 * hidden_;
    off_wx_ = alphabet_size_ * embed_;
    off_wh_ = off_wx_ + gates * embed_;
    off_b_ = off_wh_ + gates * hidden_;
    off_w1_ = off_b_ + gates;
    off_b1_ = off_w1_ + head_ * hidden_;
    off_w2_ = off_b1_ + head_;
    off_b2_ = off_w2_ + outputs_ * head_;
    values_ = VectorXd::Zero(ix(off_b2_ + outputs_));
}

Receiver Receiver::initialised(std::size_t alphabet_size, std::vector<std::size_t> slot_sizes,
                               const ReceiverConfig& config) {
    Receiver r(alphabet_size, std::move(slot_sizes), config);
    auto rng = protocol_rng(config.seed, "receiver-init");
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform_fill = [&](std::size_t from, std::size_t to, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t k = from; k < to; ++k) r.values_[ix(k)] = u(rng);
    };
    for (std::size_t k = 0; k < r.off_wx_; ++k) r.values_[ix(k)] = normal(rng);
    uniform_fill(r.off_wx_, r.off_w1_, r.hidden_);
    uniform_fill(r.off_w1_, r.off_w2_, r.hidden_);
    uniform_fill(r.off_w2_, static_cast<std::size_t>(r.values_.size()), r.head_);
    return r;
}

Eigen::Map<VectorXd> Receiver::embedding(std::size_t symbol) {
    if (symbol >= alphabet_size_) throw std::out_of_range("symbol outside the receiver alphabet");
    // Embeddings are stored symbol-major, one contiguous embed_dim block each.
    return {values_.data() + symbol * embed_, ix(embed_)};
}

Receiver::Forward Receiver::forward(const Message& message) const {
    if (message.empty()) throw std::invalid_argument("receiver input must be non-empty");
    const double* v = values_.data();
    const ConstMatrixView wx(v + off_wx_, ix(4 * hidden_), ix(embed_));
    const ConstMatrixView wh(v + off_wh_, ix(4 * hidden_), ix(hidden_));
    const ConstVectorView b(v + off_b_, ix(4 * hidden_));
    const ConstMatrixView w1(v + off_w1_, ix(head_), ix(hidden_));
    const ConstVectorView b1(v + off_b1_, ix(head_));
    const ConstMatrixView w2(v + off_w2_, ix(outputs_), ix(head_));
    const ConstVectorView b2(v + off_b2_, ix(outputs_));
    const Index H = ix(hidden_);

    const Index T = ix(message.size());
    Forward fw;
    fw.x.resize(ix(embed_), T);
    fw.gates.resize(4 * H, T);
    fw.c = MatrixXd::Zero(H, T + 1);
    fw.h = MatrixXd::Zero(H, T + 1);
    fw.tanh_c.resize(H, T);
    for (Index t = 0; t < T; ++t) {
        const auto s = message[static_cast<std::size_t>(t)];
        if (s >= alphabet_size_) throw std::invalid_argument("message symbol outside the receiver alphabet");
        fw.x.col(t) = ConstVectorView(v + s * embed_, ix(embed_));
        auto z = fw.gates.col(t);
        z.noalias() = b;
        z.noalias() += wx * fw.x.col(t);
        z.noalias() += wh * fw.h.col(t);
        z.segment(0, 2 * H) = (1.0 / (1.0 + (-z.segment(0, 2 * H).array()).exp())).matrix();
        z.segment(2 * H, H) = fast_tanh(z.segment(2 * H, H).array()).matrix();
        z.segment(3 * H, H) = (1.0 / (1.0 + (-z.segment(3 * H, H).array()).exp())).matrix();
        fw.c.col(t + 1) = z.segment(H, H).cwiseProduct(fw.c.col(t)) +
                          z.segment(0, H).cwiseProduct(z.segment(2 * H, H));
        fw.tanh_c.col(t) = fast_tanh(fw.c.col(t + 1).array()).matrix();
        fw.h.col(t + 1) = z.segment(3 * H, H).cwiseProduct(fw.tanh_c.col(t));
    }
    fw.z1 = w1 * fw.h.col(T) + b1;
    fw.a1 = fw.z1.cwiseMax(0.0);
    fw.logits = w2 * fw.a1 + b2;
    return fw;
}

std::vector<std::size_t> Receiver::predict(const Message& message) const {
    const Forward fw = forward(message);
    std::vector<std::size_t> out;
    Index offset = 0;
    for (auto size : slot_sizes_) {
        Index best = 0;
        fw.logits.segment(offset, ix(size)).maxCoeff(&best);
        out.push_back(static_cast<std::size_t>(best));
        offset += ix(size);
    }
    return out;
}

double Receiver::loss(const Example& example, VectorXd* gradient, bool* exact) const {
    if (example.target.size() != slot_sizes_.size()) {
        throw std::invalid_argument("target has the wrong number of slots");
    }
    const Forward fw = forward(example.message);

    double total = 0.0;
    bool all_correct = true;
    VectorXd d_logits(ix(outputs_));
    Index offset = 0;
    for (std::size_t k = 0; k < slot_sizes_.size(); ++k) {
        const Index n = ix(slot_sizes_[k]);
        if (example.target[k] >= slot_sizes_[k]) throw std::invalid_argument("target class out of range");
        const auto block = fw.logits.segment(offset, n);
        Index best = 0;
        const double m = block.maxCoeff(&best);
        all_correct = all_correct && static_cast<std::size_t>(best) == example.target[k];
        const Eigen::ArrayXd e = (block.array() - m).exp();
        const double z = e.sum();
        total += m + std::log(z) - block[ix(example.target[k])];
        d_logits.segment(offset, n) = (e / z).matrix();
        d_logits[offset + ix(example.target[k])] -= 1.0;
        offset += n;
    }
    if (exact) *exact = all_correct;
    if (!gradient) return total;
    if (gradient->size() != values_.size()) throw std::invalid_argument("gradient buffer has the wrong size");

    const double* v = values_.data();
    double* gv = gradient->data();
    const Index G = ix(4 * hidden_), H = ix(hidden_), E = ix(embed_);
    const ConstMatrixView wx(v + off_wx_, G, E);
    const ConstMatrixView wh(v + off_wh_, G, H);
    const ConstMatrixView w1(v + off_w1_, ix(head_), H);
    const ConstMatrixView w2(v + off_w2_, ix(outputs_), ix(head_));
    MatrixView g_wx(gv + off_wx_, G, E);
    MatrixView g_wh(gv + off_wh_, G, H);
    Eigen::Map<VectorXd> g_b(gv + off_b_, G);
    MatrixView g_w1(gv + off_w1_, ix(head_), H);
    Eigen::Map<VectorXd> g_b1(gv + off_b1_, ix(head_));
    MatrixView g_w2(gv + off_w2_, ix(outputs_), ix(head_));
    Eigen::Map<VectorXd> g_b2(gv + off_b2_, ix(outputs_));

    g_w2.noalias() += d_logits * fw.a1.transpose();
    g_b2 += d_logits;
    const VectorXd d_z1 = (w2.transpose() * d_logits).cwiseProduct(
        (fw.z1.array() > 0.0).cast<double>().matrix());
    const Index T = ix(example.message.size());
    g_w1.noalias() += d_z1 * fw.h.col(T).transpose();
    g_b1 += d_z1;

    VectorXd d_h = w1.transpose() * d_z1;
    VectorXd d_c = VectorXd::Zero(H);
    MatrixXd d_z(G, T);
    for (Index t = T; t-- > 0;) {
        const auto gates = fw.gates.col(t);
        const auto i = gates.segment(0, H).array();
        const auto f = gates.segment(H, H).array();
        const auto g = gates.segment(2 * H, H).array();
        const auto o = gates.segment(3 * H, H).array();
        const auto tc = fw.tanh_c.col(t).array();
        d_c.array() += d_h.array() * o * (1.0 - tc.square());
        auto dz = d_z.col(t);
        dz.segment(0, H) = (d_c.array() * g * i * (1.0 - i)).matrix();
        dz.segment(H, H) = (d_c.array() * fw.c.col(t).array() * f * (1.0 - f)).matrix();
        dz.segment(2 * H, H) = (d_c.array() * i * (1.0 - g.square())).matrix();
        dz.segment(3 * H, H) = (d_h.array() * tc * o * (1.0 - o)).matrix();
        d_c.array() *= f;
        d_h.noalias() = wh.transpose() * dz;
    }
    g_wx.noalias() += d_z * fw.x.transpose();
    g_wh.noalias() += d_z * fw.h.leftCols(T).transpose();
    g_b += d_z.rowwise().sum();
    const MatrixXd d_x = wx.transpose() * d_z;
    for (Index t = 0; t < T; ++t) {
        Eigen::Map<VectorXd>(gv + example.message[static_cast<std::size_t>(t)] * embed_, E) += d_x.col(t);
    }
    return total;
}

Accuracy evaluate(const Receiver& receiver, const std::vector<Example>& examples) {
    Accuracy acc;
    acc.per_slot.assign(receiver.slot_sizes().size(), 0.0);
    if (examples.empty()) return acc;
    std::size_t exact = 0;
    for (const auto& e : examples) {
        const auto pred = receiver.predict(e.message);
        bool all = true;
        for (std::size_t k = 0; k < pred.size(); ++k) {
            if (pred[k] == e.target.at(k)) {
                acc.per_slot[k] += 1.0;
            } else {
                all = false;
            }
        }
        exact += all ? 1 : 0;
    }
    const auto n = static_cast<double>(examples.size());
    acc.exact = static_cast<double>(exact) / n;
    for (auto& s : acc.per_slot) s /= n;
    return acc;
}

std::vector<TrainingRecord> train_receiver(Receiver& receiver, const std::vector<Example>& train,
                                           const ReceiverConfig& config) {
    check_config(config);
    if (train.empty()) throw std::invalid_argument("receiver training set is empty");

    FlushSubnormals flush;
    Adam adam(static_cast<std::size_t>(receiver.values().size()), config.learning_rate);
    VectorXd grad(receiver.values().size());
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<TrainingRecord> log;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        auto rng = protocol_rng(config.seed, "receiver-epoch-" + std::to_string(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            grad.setZero();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) batch_loss += receiver.loss(train[order[k]], &grad);
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("receiver training diverged at epoch " + std::to_string(epoch));
            }
            adam.step(receiver.values(), grad, 1.0 / static_cast<double>(end - start),
                      2.0 * config.weight_decay);
        }

        TrainingRecord rec;
        rec.epoch = epoch;
        std::size_t exact = 0;
        for (const auto& e : train) {
            bool correct = false;
            rec.train_loss += receiver.loss(e, nullptr, &correct);
            exact += correct ? 1 : 0;
        }
        rec.train_loss /= static_cast<double>(train.size());
        rec.train_accuracy = static_cast<double>(exact) / static_cast<double>(train.size());
        if (!std::isfinite(rec.train_loss)) {
            throw std::runtime_error("receiver training diverged at epoch " + std::to_string(epoch));
        }
        log.push_back(rec);
        if (exact == train.size()) break;
    }
    return log;
}

Receiver train_receiver(const SplitDataset& data, std::size_t alphabet_size,
                        const ReceiverConfig& config, std::vector<TrainingRecord>* log) {
    auto receiver = Receiver::initialised(alphabet_size, data.slot_sizes, config);
    auto records = train_receiver(receiver, data.train, config);
    if (log) *log = std::move(records);
    return receiver;
}

std::vector<GeneralisationRun> generalisation_runs(const Protocol& protocol,
                                                   const ReceiverConfig& config) {
    std::vector<GeneralisationRun> runs;
    for (std::size_t k = 0; k < kGeneralisationSeeds; ++k) {
        ReceiverConfig c = config;
        c.seed = config.seed + k;
        const auto data = split(protocol, c);
        std::vector<TrainingRecord> log;
        const auto receiver = train_receiver(data, protocol.alphabet().size(), c, &log);
        GeneralisationRun run;
        run.seed = c.seed;
        run.epochs = log.size();
        run.train_accuracy = log.back().train_accuracy;
        run.test = evaluate(receiver, data.test);
        runs.push_back(std::move(run));
    }
    return runs;
}

MetricScore generalisation(const Protocol& protocol, const ReceiverConfig& config) {
    const auto runs = generalisation_runs(protocol, config);
    double sum = 0.0;
    for (const auto& r : runs) sum += r.test.exact;
    return {Metric::generalisation, sum / static_cast<double>(runs.size()),
            orientation_of(Metric::generalisation)};
}

void write_training_log(const std::vector<TrainingRecord>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write training log to " + path);
    out << "epoch,train_loss,train_acc\n" << std::setprecision(9);
    for (const auto& r : log) out << r.epoch << ',' << r.train_loss << ',' << r.train_accuracy << '\n';
}

}  // namespace ntc
