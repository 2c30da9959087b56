#include "phsa/parameters.hpp"

#include <algorithm>
#include <stdexcept>

namespace phsa {

void ParameterSet::add(std::string name, Matrix value) {
    if (index_.contains(name)) {
        throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{std::move(name), std::move(value)});
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterSet::index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::out_of_range("unknown parameter: " + std::string(name));
    }
    return it->second;
}

Matrix& ParameterSet::at(std::string_view name) { return entries_[index_of(name)].value; }
const Matrix& ParameterSet::at(std::string_view name) const { return entries_[index_of(name)].value; }

std::size_t ParameterSet::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        n += e.value.size();
    }
    return n;
}

std::size_t ParameterSet::scalar_count(std::string_view prefix) const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (std::string_view(e.name).starts_with(prefix)) {
            n += e.value.size();
        }
    }
    return n;
}

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, bool requires_grad)
    : tape_(&tape), params_(&params) {
    vars_.reserve(params.size());
    for (const auto& e : params.entries()) {
        vars_.push_back(tape.leaf(e.value, requires_grad));
    }
}

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, std::span<const Var> vars)
    : tape_(&tape), params_(&params), vars_(vars.begin(), vars.end()) {
    if (vars_.size() != params.size()) {
        throw std::invalid_argument("BoundParameters: " + std::to_string(vars_.size()) + " leaves for " +
                                    std::to_string(params.size()) + " parameters");
    }
}

Var BoundParameters::operator[](std::string_view name) const { return vars_[params_->index_of(name)]; }

std::vector<Matrix> BoundParameters::gradients() const {
    std::vector<Matrix> out;
    out.reserve(vars_.size());
    for (Var v : vars_) {
        out.push_back(tape_->grad(v));
    }
    return out;
}

}  // namespace phsa
