#pragma once

// Generalisation probe: a small recurrent receiver trained to recover the
// derivation behind each message, scored on held-out derivations.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ntc/core.hpp"
#include "ntc/metrics.hpp"

namespace ntc {

struct ReceiverConfig {
    std::size_t embed_dim = 50;
    std::size_t recurrent_hidden = 50;
    std::size_t head_hidden = 50;
    double learning_rate = 1e-2;
    double weight_decay = 1e-6;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 1;
    double split_ratio = 0.8;
    std::uint64_t seed = 0;
};

struct Example {
    Message message;
    std::vector<std::size_t> target;  // one concept index per slot
};

struct SplitDataset {
    std::vector<Example> train;
    std::vector<Example> test;
    std::vector<std::size_t> slot_sizes;
    std::uint64_t seed = 0;
};

/// Seeded shuffle of the protocol; the first ceil(ratio * |D|) entries train
/// (capped so that the test side is never empty). Throws for |D| < 2.
SplitDataset split(const Protocol& protocol, const ReceiverConfig& config);

/// Embedding -> single-layer LSTM -> ReLU MLP -> one softmax block per slot.
/// Gate order in the stacked LSTM weights is (input, forget, cell, output).
class Receiver {
public:
    Receiver(std::size_t alphabet_size, std::vector<std::size_t> slot_sizes,
             const ReceiverConfig& config);

    /// Embeddings ~ N(0, 1); everything else ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static Receiver initialised(std::size_t alphabet_size, std::vector<std::size_t> slot_sizes,
                                const ReceiverConfig& config);

    std::size_t alphabet_size() const { return alphabet_size_; }
    const std::vector<std::size_t>& slot_sizes() const { return slot_sizes_; }

    Eigen::VectorXd& values() { return values_; }
    const Eigen::VectorXd& values() const { return values_; }

    /// Mutable view of one symbol's embedding.
    Eigen::Map<Eigen::VectorXd> embedding(std::size_t symbol);

    std::vector<std::size_t> predict(const Message& message) const;

    /// Summed cross-entropy over slots; adds the loss gradient into `gradient`
    /// and reports whether every slot's argmax is correct, when asked.
    double loss(const Example& example, Eigen::VectorXd* gradient = nullptr,
                bool* exact = nullptr) const;

private:
    struct Forward;

    Forward forward(const Message& message) const;

    std::size_t alphabet_size_;
    std::vector<std::size_t> slot_sizes_;
    std::size_t embed_;
    std::size_t hidden_;
    std::size_t head_;
    std::size_t outputs_;
    std::size_t off_wx_, off_wh_, off_b_, off_w1_, off_b1_, off_w2_, off_b2_;
    Eigen::VectorXd values_;
};

struct TrainingRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
};

/// Adam on mean-per-batch summed cross-entropy + weight_decay * ||params||^2,
/// until max_epochs or exact-match training accuracy 1. Epoch order is a
/// seeded shuffle. Throws std::runtime_error on a non-finite loss.
std::vector<TrainingRecord> train_receiver(Receiver& receiver, const std::vector<Example>& train,
                                           const ReceiverConfig& config);

/// Initialises from config.seed and trains.
Receiver train_receiver(const SplitDataset& data, std::size_t alphabet_size,
                        const ReceiverConfig& config, std::vector<TrainingRecord>* log = nullptr);

struct Accuracy {
    double exact = 0.0;               // all slots correct
    std::vector<double> per_slot;
};

Accuracy evaluate(const Receiver& receiver, const std::vector<Example>& examples);

struct GeneralisationRun {
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double train_accuracy = 0.0;
    Accuracy test;
};

inline constexpr std::size_t kGeneralisationSeeds = 5;

/// Five independent split/train/evaluate runs with seeds config.seed + k.
std::vector<GeneralisationRun> generalisation_runs(const Protocol& protocol,
                                                   const ReceiverConfig& config);

/// Mean exact-match test accuracy over the five runs.
MetricScore generalisation(const Protocol& protocol, const ReceiverConfig& config);

void write_training_log(const std::vector<TrainingRecord>& log, const std::string& path);

}  // namespace ntc
