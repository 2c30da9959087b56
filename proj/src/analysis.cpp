#include "phsa/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "phsa/errors.hpp"
#include "phsa/text_io.hpp"

namespace phsa {

namespace {

struct RunningStats {
    std::vector<double> values;

    void add(double v) { values.push_back(v); }
    std::size_t count() const { return values.size(); }
    double mean() const {
        if (values.empty()) return 0.0;
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
    /// Population std, two-pass; exactly 0 when all values are equal.
    double stddev() const {
        if (values.empty() || std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
            return 0.0;
        }
        const double m = mean();
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        return std::sqrt(ss / static_cast<double>(values.size()));
    }
};

}  // namespace

ParMatrix compute_par(std::span<const LabeledMap> maps, std::size_t num_classes,
                      std::vector<std::string> class_names, const ParOptions& options) {
    if (num_classes == 0) {
        throw DataError("PAR needs at least one class");
    }
    if (class_names.empty()) {
        for (std::size_t c = 0; c < num_classes; ++c) {
            class_names.push_back(std::to_string(c));
        }
    }
    if (class_names.size() != num_classes) {
        throw DataError("class name count does not match num_classes");
    }
    ParMatrix par{Matrix(num_classes, num_classes), std::move(class_names),
                  std::vector<std::size_t>(num_classes, 0)};
    std::vector<double> mass(num_classes);
    for (const auto& lm : maps) {
        const Matrix& m = *lm.map;
        const std::size_t t = lm.labels.size();
        if (m.rows() != t || m.cols() != t) {
            throw DataError("attention map " + m.shape_string() + " does not match " +
                            std::to_string(t) + " labels");
        }
        for (int l : lm.labels) {
            if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
                throw DataError("label " + std::to_string(l) + " outside [0, " +
                                std::to_string(num_classes) + ")");
            }
        }
        for (std::size_t q = 0; q < t; ++q) {
            const auto qc = static_cast<std::size_t>(lm.labels[q]);
            std::fill(mass.begin(), mass.end(), 0.0);
            double total = 0.0;
            for (std::size_t k = 0; k < t; ++k) {
                mass[static_cast<std::size_t>(lm.labels[k])] += m(q, k);
                total += m(q, k);
            }
            if (std::abs(total - 1.0) > options.stochastic_tolerance) {
                throw DataError("attention row sums to " + text::format(total) + ", not 1");
            }
            if (options.exclude_silence) {
                if (qc == 0) {
                    continue;
                }
                const double kept = total - mass[0];
                if (kept <= 0.0) {
                    continue;
                }
                mass[0] = 0.0;
                for (double& v : mass) {
                    v /= kept;
                }
            }
            for (std::size_t j = 0; j < num_classes; ++j) {
                par.values(qc, j) += mass[j];
            }
            ++par.support[qc];
        }
    }
    for (std::size_t i = 0; i < num_classes; ++i) {
        if (par.support[i] > 0) {
            const double inv = 1.0 / static_cast<double>(par.support[i]);
            for (double& v : par.values.row_span(i)) {
                v *= inv;
            }
        }
    }
    return par;
}

double par_symmetry_score(const Matrix& values, std::span<const std::size_t> support) {
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < values.rows(); ++i) {
        if (support[i] == 0) continue;
        for (std::size_t j = 0; j < values.cols(); ++j) {
            if (support[j] == 0) continue;
            diff += std::abs(values(i, j) - values(j, i));
            norm += std::abs(values(i, j)) + std::abs(values(j, i));
        }
    }
    return norm == 0.0 ? 1.0 : 1.0 - diff / norm;
}

double par_symmetry_score(const ParMatrix& par) { return par_symmetry_score(par.values, par.support); }

double row_entropy(std::span<const double> row) noexcept {
    double h = 0.0;
    for (double p : row) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

double row_entropy_variance(const Matrix& map) {
    RunningStats s;
    for (std::size_t r = 0; r < map.rows(); ++r) {
        s.add(row_entropy(map.row_span(r)));
    }
    const double sd = s.stddev();
    return sd * sd;
}

EntropyReport attention_entropy(std::span<const LayerHeadMap> maps, std::string tag) {
    EntropyReport report;
    report.tag = std::move(tag);
    std::map<std::pair<std::size_t, std::size_t>, RunningStats> per_head;
    RunningStats rows;
    for (const auto& m : maps) {
        report.max_length = std::max(report.max_length, m.map.cols());
        auto& head = per_head[{m.layer, m.head}];
        for (std::size_t r = 0; r < m.map.rows(); ++r) {
            const auto row = m.map.row_span(r);
            double total = 0.0;
            for (double p : row) {
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-6) {
                throw DataError("attention row sums to " + text::format(total) + ", not 1");
            }
            const double h = row_entropy(row);
            head.add(h);
            rows.add(h);
        }
    }
    RunningStats heads;
    for (const auto& [key, s] : per_head) {
        report.heads.push_back(HeadEntropy{key.first, key.second, s.mean(), s.stddev(), s.count()});
        heads.add(s.mean());
    }
    report.row_mean = rows.mean();
    report.row_std = rows.stddev();
    report.head_mean = heads.mean();
    report.head_std = heads.stddev();
    return report;
}

SlopeReport slope_report(const ParameterSet& params, const EncoderConfig& cfg) {
    if (cfg.num_phsa_layers == 0) {
        throw ConfigError("slope report requires at least one phSA layer");
    }
    SlopeReport report;
    for (std::size_t l = 0; l < cfg.num_phsa_layers; ++l) {
        for (std::size_t h = 0; h < cfg.num_heads; ++h) {
            const std::string pre = head_prefix(l, h);
            report.heads.push_back(HeadSlopes{l, h, params.at(pre + "alpha_s")(0, 0),
                                              params.at(pre + "alpha_c")(0, 0)});
        }
    }
    return report;
}

double within_group_confusion_ratio(const std::vector<std::vector<std::size_t>>& confusion,
                                    const PhonemeInventory& inv) {
    RunningStats within;
    RunningStats across;
    for (std::size_t i = 0; i < confusion.size(); ++i) {
        double total = 0.0;
        for (std::size_t n : confusion[i]) {
            total += static_cast<double>(n);
        }
        if (total == 0.0) continue;
        const int gi = inv.group_of(static_cast<int>(i));
        for (std::size_t j = 0; j < confusion[i].size(); ++j) {
            if (i == j) continue;
            const double rate = static_cast<double>(confusion[i][j]) / total;
            if (gi >= 0 && gi == inv.group_of(static_cast<int>(j))) {
                within.add(rate);
            } else {
                across.add(rate);
            }
        }
    }
    const double w = within.mean();
    const double a = across.mean();
    if (a == 0.0) {
        return w > 0.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
    }
    return w / a;
}

void write_par(std::ostream& out, const ParMatrix& par) {
    out << "# phsa-par v1\n";
    out << "class_i,class_j,value,support_i\n";
    for (std::size_t i = 0; i < par.values.rows(); ++i) {
        for (std::size_t j = 0; j < par.values.cols(); ++j) {
            out << par.class_names[i] << ',' << par.class_names[j] << ',' << text::format(par.values(i, j))
                << ',' << par.support[i] << '\n';
        }
    }
}

void write_entropy(std::ostream& out, std::span<const EntropyReport> reports) {
    out << "# phsa-entropy v1 (natural log)\n";
    out << "layer,head,metric,mean,std\n";
    for (const auto& r : reports) {
        const std::string metric = "entropy[" + r.tag + "]";
        for (const auto& h : r.heads) {
            out << h.layer << ',' << h.head << ',' << metric << ',' << text::format(h.mean) << ','
                << text::format(h.std) << '\n';
        }
        out << "all,all," << metric << "/rows," << text::format(r.row_mean) << ','
            << text::format(r.row_std) << '\n';
        out << "all,all," << metric << "/heads," << text::format(r.head_mean) << ','
            << text::format(r.head_std) << '\n';
    }
}

void write_slopes(std::ostream& out, const SlopeReport& report) {
    out << "# phsa-slopes v1\n";
    out << "layer,head,metric,mean,std\n";
    for (const auto& h : report.heads) {
        out << h.layer << ',' << h.head << ",alpha_s," << text::format(h.alpha_s) << ",0\n";
        out << h.layer << ',' << h.head << ",alpha_c," << text::format(h.alpha_c) << ",0\n";
    }
}

void write_attention_map(std::ostream& out, const LayerHeadMap& map) {
    out << "# phsa-attention-map v1\n";
    out << "layer,head,T\n";
    out << map.layer << ',' << map.head << ',' << map.map.cols() << '\n';
    for (std::size_t r = 0; r < map.map.rows(); ++r) {
        for (std::size_t c = 0; c < map.map.cols(); ++c) {
            if (c) out << ',';
            out << text::format(map.map(r, c));
        }
        out << '\n';
    }
}

}  // namespace phsa
