#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "phsa/matrix.hpp"

namespace phsa {

/// Phoneme classes of the synthetic task. Class 0 is silence. Members of a
/// confusable group share part of their mean vector.
struct PhonemeInventory {
    std::size_t num_classes = 12;
    std::vector<std::vector<int>> confusable_groups{{1, 2, 3}, {4, 5}, {6, 7}};

    /// Throws ConfigError if ids repeat, groups overlap, silence is grouped
    /// or an id is out of range.
    void validate() const;
    /// Group index of `cls`, or -1 when ungrouped.
    int group_of(int cls) const;
    std::string class_name(int cls) const;

    friend bool operator==(const PhonemeInventory&, const PhonemeInventory&) = default;
};

struct Utterance {
    std::uint64_t id = 0;
    Matrix features;          // T×d_in
    std::vector<int> labels;  // length T

    std::size_t length() const noexcept { return labels.size(); }
    friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct GeneratorConfig {
    std::size_t min_length = 20;
    std::size_t max_length = 50;
    std::size_t input_dim = 16;
    std::size_t min_segment = 3;
    std::size_t max_segment = 10;
    double noise_scale = 0.3;
    double speaker_scale = 0.5;
    /// Fraction of coordinates a confusable group shares.
    double shared_fraction = 0.5;
    std::uint64_t seed = 7;

    void validate() const;
    friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Unit-variance Gaussian class means, num_classes×input_dim. Members of a
/// confusable group copy the group's shared leading coordinates. Depends on
/// (inventory, input_dim, shared_fraction, seed) only.
Matrix class_means(const PhonemeInventory& inv, const GeneratorConfig& cfg);

/// Utterances built from segments of min_segment..max_segment frames of a
/// uniformly drawn class, truncated to a length drawn uniformly from
/// [min_length, max_length]. Each frame is the class mean plus a
/// per-utterance speaker offset and per-frame noise. `stream` selects an
/// independent utterance stream (e.g. 0 = train, 1 = dev) over the same
/// class means. Pure function of its arguments.
std::vector<Utterance> generate_dataset(const PhonemeInventory& inv, const GeneratorConfig& cfg,
                                        std::size_t num_utterances, std::uint64_t stream = 0);

/// Text serialization: a versioned header line, one line of metadata, then
/// one record per utterance:
///   id,T,d_in,<T*d_in features row-major>,<T labels>
/// Values are written in shortest round-trip form, so load(save(x)) == x.
void save_dataset(std::ostream& out, const std::vector<Utterance>& data, std::size_t num_classes);
std::vector<Utterance> load_dataset(std::istream& in, std::size_t* num_classes = nullptr);
void save_dataset(const std::string& path, const std::vector<Utterance>& data, std::size_t num_classes);
std::vector<Utterance> load_dataset(const std::string& path, std::size_t* num_classes = nullptr);

inline constexpr const char* kDatasetHeader = "# phsa-dataset v1";

}  // namespace phsa
