#include "phsa/checkpoint.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "phsa/errors.hpp"
#include "phsa/text_io.hpp"

namespace phsa {

namespace {

std::string expect_field(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(key + "=", 0) != 0) {
        throw DataError("checkpoint: expected '" + key + "=' line");
    }
    return line.substr(key.size() + 1);
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out << kCheckpointHeader << '\n';
    out << "step=" << ckpt.step << '\n';
    out << "epoch=" << ckpt.epoch << '\n';
    out << "config=" << nlohmann::ordered_json::parse(to_json(ckpt.config)).dump() << '\n';
    out << "tensors=" << ckpt.params.size() << '\n';
    for (const auto& e : ckpt.params.entries()) {
        out << e.name << ',' << e.value.rows() << ',' << e.value.cols();
        for (double v : e.value.data()) {
            out << ',' << text::format(v);
        }
        out << '\n';
    }
}

Checkpoint load_checkpoint(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointHeader) {
        throw DataError("checkpoint: missing header '" + std::string(kCheckpointHeader) + "'");
    }
    Checkpoint ckpt;
    try {
        ckpt.step = text::parse_uint(expect_field(in, "step"));
        ckpt.epoch = text::parse_uint(expect_field(in, "epoch"));
        ckpt.config = merge_json(RunConfig{}, expect_field(in, "config"));
        const std::size_t count = text::parse_uint(expect_field(in, "tensors"));
        for (std::size_t i = 0; i < count; ++i) {
            if (!std::getline(in, line)) {
                throw DataError("checkpoint: expected " + std::to_string(count) + " tensors, found " +
                                std::to_string(i));
            }
            const auto fields = text::split(line, ',');
            if (fields.size() < 3) {
                throw DataError("checkpoint: truncated tensor line");
            }
            const std::size_t rows = text::parse_uint(fields[1]);
            const std::size_t cols = text::parse_uint(fields[2]);
            if (fields.size() != 3 + rows * cols) {
                throw DataError("checkpoint: tensor '" + std::string(fields[0]) + "' has " +
                                std::to_string(fields.size() - 3) + " values for shape " +
                                std::to_string(rows) + "x" + std::to_string(cols));
            }
            std::vector<double> values(rows * cols);
            for (std::size_t k = 0; k < values.size(); ++k) {
                values[k] = text::parse_double(fields[3 + k]);
            }
            ckpt.params.add(std::string(fields[0]), Matrix(rows, cols, std::move(values)));
        }
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ostringstream ss;
    save_checkpoint(ss, ckpt);
    text::write_file_atomic(path, ss.str());
}

Checkpoint load_checkpoint(const std::string& path) {
    std::istringstream in(text::read_file(path));
    return load_checkpoint(in);
}

}  // namespace phsa
