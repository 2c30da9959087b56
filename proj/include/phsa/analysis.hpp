#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "phsa/dataset.hpp"
#include "phsa/encoder.hpp"
#include "phsa/matrix.hpp"
#include "phsa/parameters.hpp"

namespace phsa {

/// One attention map with the class label of every frame.
struct LabeledMap {
    const Matrix* map = nullptr;
    std::span<const int> labels;
};

/// Phoneme attention relationship: values(i, j) is the average attention
/// mass that query frames of class i assign to key frames of class j.
struct ParMatrix {
    Matrix values;
    std::vector<std::string> class_names;
    /// Query frames per class; rows with zero support are all-zero.
    std::vector<std::size_t> support;
};

struct ParOptions {
    /// Drop silence (class 0) queries and renormalize each query's mass over
    /// non-silence keys.
    bool exclude_silence = false;
    double stochastic_tolerance = 1e-9;
};

/// Throws DataError on label/map length mismatch, out-of-range labels or
/// rows that are not stochastic within the tolerance.
ParMatrix compute_par(std::span<const LabeledMap> maps, std::size_t num_classes,
                      std::vector<std::string> class_names = {}, const ParOptions& options = {});

/// 1 − ‖P − Pᵀ‖₁ / (‖P‖₁ + ‖Pᵀ‖₁) over the classes with support; 1 means
/// perfectly symmetric. An all-zero matrix scores 1.
double par_symmetry_score(const ParMatrix& par);
double par_symmetry_score(const Matrix& values, std::span<const std::size_t> support);

/// −Σ p ln p (nats) with 0·ln 0 = 0.
double row_entropy(std::span<const double> row) noexcept;
/// Population variance of the row entropies of one map.
double row_entropy_variance(const Matrix& map);

struct HeadEntropy {
    std::size_t layer = 0;
    std::size_t head = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t rows = 0;
};

struct EntropyReport {
    std::string tag;  // full | similarity-only | content-only
    std::vector<HeadEntropy> heads;
    /// Mean and std over every query row of every map.
    double row_mean = 0.0;
    double row_std = 0.0;
    /// Mean and std across the per-head means.
    double head_mean = 0.0;
    double head_std = 0.0;
    std::size_t max_length = 0;
};

/// Aggregates row entropies per (layer, head). Throws DataError on a row
/// that does not sum to 1 within 1e-6.
EntropyReport attention_entropy(std::span<const LayerHeadMap> maps, std::string tag = "full");

struct HeadSlopes {
    std::size_t layer = 0;
    std::size_t head = 0;
    double alpha_s = 1.0;
    double alpha_c = 1.0;
};

struct SlopeReport {
    std::vector<HeadSlopes> heads;
};

/// PReLU slopes of every phSA head. Throws ConfigError without phSA layers.
SlopeReport slope_report(const ParameterSet& params, const EncoderConfig& cfg);

/// Mean row-normalized off-diagonal confusion rate between classes of the
/// same confusable group, divided by the same rate for pairs in different
/// groups. Returns +inf when only within-group confusions occur and NaN when
/// there are none at all.
double within_group_confusion_ratio(const std::vector<std::vector<std::size_t>>& confusion,
                                    const PhonemeInventory& inv);

// Delimited-text writers; each starts with a one-line versioned header.
void write_par(std::ostream& out, const ParMatrix& par);
void write_entropy(std::ostream& out, std::span<const EntropyReport> reports);
void write_slopes(std::ostream& out, const SlopeReport& report);
/// header row "layer,head,T" with values, then T rows of T values.
void write_attention_map(std::ostream& out, const LayerHeadMap& map);

}  // namespace phsa
