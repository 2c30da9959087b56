#include "phsa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "phsa/errors.hpp"
#include "phsa/random.hpp"

namespace phsa {

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be finite and >= 0");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("weight_decay must be >= 0");
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
}

AdamOptimizer::AdamOptimizer(const TrainConfig& cfg, const ParameterSet& params) : cfg_(cfg) {
    for (const auto& e : params.entries()) {
        m_.emplace_back(e.value.rows(), e.value.cols());
        v_.emplace_back(e.value.rows(), e.value.cols());
    }
}

void AdamOptimizer::step(ParameterSet& params, const std::vector<Matrix>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& entries = params.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Matrix& w = entries[i].value;
        const bool decay = w.rows() > 1 && w.cols() > 1;
        auto wd = w.data();
        auto gd = grads[i].data();
        auto md = m_[i].data();
        auto vd = v_[i].data();
        for (std::size_t k = 0; k < wd.size(); ++k) {
            md[k] = cfg_.beta1 * md[k] + (1.0 - cfg_.beta1) * gd[k];
            vd[k] = cfg_.beta2 * vd[k] + (1.0 - cfg_.beta2) * gd[k] * gd[k];
            const double m_hat = md[k] / bc1;
            const double v_hat = vd[k] / bc2;
            double update = m_hat / (std::sqrt(v_hat) + cfg_.adam_epsilon);
            if (decay) {
                update += cfg_.weight_decay * wd[k];
            }
            wd[k] -= cfg_.learning_rate * update;
        }
    }
}

Evaluation evaluate_predictions(std::span<const int> labels, std::span<const int> predictions,
                                std::size_t num_classes) {
    if (labels.empty()) {
        throw DataError("cannot evaluate an empty set of frames");
    }
    if (labels.size() != predictions.size()) {
        throw DataError("label and prediction counts differ");
    }
    Evaluation ev;
    ev.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++ev.confusion.at(static_cast<std::size_t>(labels[i])).at(static_cast<std::size_t>(predictions[i]));
        correct += labels[i] == predictions[i] ? 1 : 0;
    }
    ev.frames = labels.size();
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    ev.loss = std::numeric_limits<double>::quiet_NaN();
    return ev;
}

Evaluation evaluate(const ModelConfig& cfg, const ParameterSet& params,
                    const std::vector<Utterance>& data, ScoreTerms phsa_terms) {
    if (data.empty()) {
        throw DataError("cannot evaluate an empty dataset");
    }
    std::vector<int> labels;
    std::vector<int> predictions;
    double loss_sum = 0.0;
    for (const auto& u : data) {
        Tape tape;
        BoundParameters bound(tape, params, false);
        const Var logits = model_logits(cfg, bound, tape.constant(u.features), phsa_terms);
        loss_sum += cross_entropy(logits, u.labels, false).value()(0, 0);
        const auto pred = argmax_rows(logits.value());
        labels.insert(labels.end(), u.labels.begin(), u.labels.end());
        predictions.insert(predictions.end(), pred.begin(), pred.end());
    }
    Evaluation ev = evaluate_predictions(labels, predictions, cfg.num_classes);
    ev.loss = loss_sum / static_cast<double>(ev.frames);
    return ev;
}

double batch_loss_and_gradients(const ModelConfig& model, const ParameterSet& params,
                                std::span<const Utterance* const> batch, std::vector<Matrix>* grads) {
    std::size_t frames = 0;
    double loss = 0.0;
    if (grads != nullptr) {
        grads->clear();
        for (const auto& e : params.entries()) {
            grads->emplace_back(e.value.rows(), e.value.cols());
        }
    }
    for (const Utterance* u : batch) {
        Tape tape;
        BoundParameters bound(tape, params, grads != nullptr);
        const Var logits = model_logits(model, bound, tape.constant(u->features));
        const Var l = cross_entropy(logits, u->labels, false);
        loss += l.value()(0, 0);
        frames += u->length();
        if (grads != nullptr) {
            tape.backward(l);
            for (std::size_t i = 0; i < bound.size(); ++i) {
                const Matrix g = tape.grad(bound.at(i));
                auto dst = (*grads)[i].data();
                auto src = g.data();
                for (std::size_t k = 0; k < dst.size(); ++k) {
                    dst[k] += src[k];
                }
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(frames);
    if (grads != nullptr) {
        for (Matrix& g : *grads) {
            for (double& v : g.data()) {
                v *= inv;
            }
        }
    }
    return loss * inv;
}

TrainResult train(const TrainConfig& cfg, const ModelConfig& model, const std::vector<Utterance>& data,
                  const EpochCallback& on_epoch) {
    return train(cfg, model, data, init_model(model), on_epoch);
}

TrainResult train(const TrainConfig& cfg, const ModelConfig& model, const std::vector<Utterance>& data,
                  ParameterSet initial, const EpochCallback& on_epoch) {
    cfg.validate();
    model.validate();
    if (data.empty()) {
        throw DataError("training data is empty");
    }
    TrainResult result{std::move(initial), {}, 0};
    AdamOptimizer opt(cfg, result.params);

    auto record = [&](std::size_t epoch) {
        const Evaluation ev = evaluate(model, result.params, data);
        if (!std::isfinite(ev.loss)) {
            throw DivergenceError("non-finite evaluation loss after epoch " + std::to_string(epoch));
        }
        result.history.push_back(EpochStats{epoch, ev.loss, ev.accuracy});
        if (on_epoch) {
            on_epoch(result.history.back(), result.params, opt.steps());
        }
    };

    try {
        record(0);
        std::vector<std::size_t> order(data.size());
        std::vector<Matrix> grads;
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng rng(derive_seed(cfg.seed, epoch));
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[rng.below(i)]);
            }
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                std::vector<const Utterance*> batch;
                for (std::size_t i = start; i < end; ++i) {
                    batch.push_back(&data[order[i]]);
                }
                std::sort(batch.begin(), batch.end(),
                          [](const Utterance* a, const Utterance* b) { return a->id < b->id; });
                const double loss = batch_loss_and_gradients(model, result.params, batch, &grads);
                if (!std::isfinite(loss)) {
                    throw DivergenceError("non-finite batch loss at epoch " + std::to_string(epoch) +
                                          ", step " + std::to_string(opt.steps() + 1));
                }
                opt.step(result.params, grads);
            }
            record(epoch);
        }
    } catch (const std::domain_error& e) {
        throw DivergenceError(std::string("training diverged: ") + e.what());
    }
    result.steps = opt.steps();
    return result;
}

}  // namespace phsa
