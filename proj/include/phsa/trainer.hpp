#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "phsa/classifier.hpp"
#include "phsa/dataset.hpp"
#include "phsa/parameters.hpp"

namespace phsa {

struct TrainConfig {
    double learning_rate = 1.56e-3;
    double weight_decay = 1e-4;
    std::size_t batch_size = 8;
    std::size_t epochs = 12;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adam with bias correction and decoupled weight decay. Decay applies to
/// weight matrices only (both dimensions > 1); biases, norm gains, c and the
/// PReLU slopes are not decayed.
class AdamOptimizer {
public:
    AdamOptimizer(const TrainConfig& cfg, const ParameterSet& params);
    void step(ParameterSet& params, const std::vector<Matrix>& grads);
    std::size_t steps() const noexcept { return t_; }

private:
    TrainConfig cfg_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    std::size_t t_ = 0;
};

struct Evaluation {
    double accuracy = 0.0;
    /// Mean per-frame cross-entropy (nats); NaN when produced from predictions only.
    double loss = 0.0;
    std::size_t frames = 0;
    /// confusion[true][predicted] frame counts.
    std::vector<std::vector<std::size_t>> confusion;
};

Evaluation evaluate_predictions(std::span<const int> labels, std::span<const int> predictions,
                                std::size_t num_classes);
/// Throws DataError on empty data.
Evaluation evaluate(const ModelConfig& cfg, const ParameterSet& params,
                    const std::vector<Utterance>& data, ScoreTerms phsa_terms = ScoreTerms::full);

struct EpochStats {
    std::size_t epoch = 0;  // 0 = before training
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    ParameterSet params;
    std::vector<EpochStats> history;
    std::size_t steps = 0;
};

using EpochCallback = std::function<void(const EpochStats&, const ParameterSet&, std::size_t step)>;

/// Minimizes mean per-frame cross-entropy with mini-batches drawn from a
/// seeded shuffle; within a batch, gradients accumulate in utterance-id
/// order. history[0] is the evaluation of the initial parameters and
/// history[e] the evaluation after epoch e, both on `data`. Throws
/// DivergenceError on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const ModelConfig& model, const std::vector<Utterance>& data,
                  const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& cfg, const ModelConfig& model, const std::vector<Utterance>& data,
                  ParameterSet initial, const EpochCallback& on_epoch = {});

/// Loss and its gradients for a batch, summed over frames and divided by
/// the frame count.
double batch_loss_and_gradients(const ModelConfig& model, const ParameterSet& params,
                                std::span<const Utterance* const> batch, std::vector<Matrix>* grads);

}  // namespace phsa
