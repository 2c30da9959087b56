#include "phsa/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "phsa/errors.hpp"
#include "phsa/random.hpp"
#include "phsa/text_io.hpp"

namespace phsa {

void PhonemeInventory::validate() const {
    if (num_classes < 2) {
        throw ConfigError("inventory needs at least two classes");
    }
    std::set<int> seen;
    for (const auto& group : confusable_groups) {
        for (int cls : group) {
            if (cls <= 0 || static_cast<std::size_t>(cls) >= num_classes) {
                throw ConfigError("confusable class id " + std::to_string(cls) +
                                  " must be in [1, num_classes); silence (0) cannot be grouped");
            }
            if (!seen.insert(cls).second) {
                throw ConfigError("class " + std::to_string(cls) + " appears in more than one group slot");
            }
        }
    }
}

int PhonemeInventory::group_of(int cls) const {
    for (std::size_t g = 0; g < confusable_groups.size(); ++g) {
        for (int member : confusable_groups[g]) {
            if (member == cls) {
                return static_cast<int>(g);
            }
        }
    }
    return -1;
}

std::string PhonemeInventory::class_name(int cls) const {
    return cls == 0 ? std::string("sil") : "p" + std::to_string(cls);
}

void GeneratorConfig::validate() const {
    if (min_length < 4 || min_length > max_length) {
        throw ConfigError("length range must satisfy 4 <= min <= max, got [" +
                          std::to_string(min_length) + ", " + std::to_string(max_length) + "]");
    }
    if (input_dim < 8) {
        throw ConfigError("input_dim must be at least 8, got " + std::to_string(input_dim));
    }
    if (min_segment == 0 || min_segment > max_segment) {
        throw ConfigError("segment range must satisfy 1 <= min <= max");
    }
    if (noise_scale < 0.0 || speaker_scale < 0.0 || shared_fraction < 0.0 || shared_fraction > 1.0) {
        throw ConfigError("noise and speaker scales must be >= 0 and shared_fraction in [0, 1]");
    }
}

Matrix class_means(const PhonemeInventory& inv, const GeneratorConfig& cfg) {
    inv.validate();
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0));
    Matrix means = rng.normal_matrix(inv.num_classes, cfg.input_dim);
    const auto shared = static_cast<std::size_t>(
        std::lround(cfg.shared_fraction * static_cast<double>(cfg.input_dim)));
    for (const auto& group : inv.confusable_groups) {
        const Matrix common = rng.normal_matrix(1, cfg.input_dim);
        for (int cls : group) {
            for (std::size_t j = 0; j < shared; ++j) {
                means(static_cast<std::size_t>(cls), j) = common(0, j);
            }
        }
    }
    return means;
}

std::vector<Utterance> generate_dataset(const PhonemeInventory& inv, const GeneratorConfig& cfg,
                                        std::size_t num_utterances, std::uint64_t stream) {
    const Matrix means = class_means(inv, cfg);
    Rng rng(derive_seed(cfg.seed, 1000 + stream));
    std::vector<Utterance> out;
    out.reserve(num_utterances);
    for (std::size_t u = 0; u < num_utterances; ++u) {
        const std::size_t length = rng.between(cfg.min_length, cfg.max_length);
        const Matrix speaker = rng.normal_matrix(1, cfg.input_dim, cfg.speaker_scale);
        std::vector<int> labels;
        labels.reserve(length);
        while (labels.size() < length) {
            const int cls = static_cast<int>(rng.below(inv.num_classes));
            const std::size_t seg = rng.between(cfg.min_segment, cfg.max_segment);
            for (std::size_t i = 0; i < seg && labels.size() < length; ++i) {
                labels.push_back(cls);
            }
        }
        Matrix features(length, cfg.input_dim);
        for (std::size_t t = 0; t < length; ++t) {
            const auto cls = static_cast<std::size_t>(labels[t]);
            for (std::size_t j = 0; j < cfg.input_dim; ++j) {
                features(t, j) = means(cls, j) + speaker(0, j) + cfg.noise_scale * rng.normal();
            }
        }
        out.push_back(Utterance{u, std::move(features), std::move(labels)});
    }
    return out;
}

void save_dataset(std::ostream& out, const std::vector<Utterance>& data, std::size_t num_classes) {
    out << kDatasetHeader << '\n';
    const std::size_t d_in = data.empty() ? 0 : data.front().features.cols();
    out << "num_classes=" << num_classes << ",num_utterances=" << data.size() << ",d_in=" << d_in << '\n';
    for (const auto& u : data) {
        out << u.id << ',' << u.length() << ',' << u.features.cols();
        for (double v : u.features.data()) {
            out << ',' << text::format(v);
        }
        for (int l : u.labels) {
            out << ',' << l;
        }
        out << '\n';
    }
}

std::vector<Utterance> load_dataset(std::istream& in, std::size_t* num_classes) {
    std::string line;
    if (!std::getline(in, line) || line != kDatasetHeader) {
        throw DataError("missing dataset header '" + std::string(kDatasetHeader) + "'");
    }
    if (!std::getline(in, line)) {
        throw DataError("missing dataset metadata line");
    }
    std::size_t classes = 0;
    std::size_t expected = 0;
    for (auto field : text::split(line, ',')) {
        const auto kv = text::split(field, '=');
        if (kv.size() != 2) {
            throw DataError("bad metadata field '" + std::string(field) + "'");
        }
        if (kv[0] == "num_classes") classes = text::parse_uint(kv[1]);
        else if (kv[0] == "num_utterances") expected = text::parse_uint(kv[1]);
    }
    std::vector<Utterance> data;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto fields = text::split(line, ',');
        if (fields.size() < 3) {
            throw DataError("truncated utterance record");
        }
        const std::uint64_t id = text::parse_uint(fields[0]);
        const std::size_t t = text::parse_uint(fields[1]);
        const std::size_t d = text::parse_uint(fields[2]);
        if (t == 0 || d == 0 || fields.size() != 3 + t * d + t) {
            throw DataError("utterance " + std::to_string(id) + ": record length does not match T=" +
                            std::to_string(t) + ", d_in=" + std::to_string(d));
        }
        std::vector<double> values(t * d);
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] = text::parse_double(fields[3 + i]);
        }
        std::vector<int> labels(t);
        for (std::size_t i = 0; i < t; ++i) {
            const long long l = text::parse_int(fields[3 + t * d + i]);
            if (l < 0 || static_cast<std::size_t>(l) >= classes) {
                throw DataError("utterance " + std::to_string(id) + ": label " + std::to_string(l) +
                                " outside [0, " + std::to_string(classes) + ")");
            }
            labels[i] = static_cast<int>(l);
        }
        data.push_back(Utterance{id, Matrix(t, d, std::move(values)), std::move(labels)});
    }
    if (data.size() != expected) {
        throw DataError("dataset declares " + std::to_string(expected) + " utterances but holds " +
                        std::to_string(data.size()));
    }
    if (num_classes != nullptr) {
        *num_classes = classes;
    }
    return data;
}

void save_dataset(const std::string& path, const std::vector<Utterance>& data, std::size_t num_classes) {
    std::ostringstream ss;
    save_dataset(ss, data, num_classes);
    text::write_file_atomic(path, ss.str());
}

std::vector<Utterance> load_dataset(const std::string& path, std::size_t* num_classes) {
    std::istringstream in(text::read_file(path));
    return load_dataset(in, num_classes);
}

}  // namespace phsa
