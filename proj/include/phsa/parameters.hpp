#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phsa/autodiff.hpp"
#include "phsa/matrix.hpp"

namespace phsa {

/// Ordered collection of named parameter tensors. Insertion order is the
/// canonical order for serialization, optimizer state and gradient checks.
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Matrix value;
    };

    void add(std::string name, Matrix value);
    bool contains(std::string_view name) const;
    Matrix& at(std::string_view name);
    const Matrix& at(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    std::size_t size() const noexcept { return entries_.size(); }
    std::vector<Entry>& entries() noexcept { return entries_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    /// Total number of scalars across all tensors.
    std::size_t scalar_count() const noexcept;
    /// Scalars in tensors whose name starts with `prefix`.
    std::size_t scalar_count(std::string_view prefix) const;

    friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
        return a.entries_.size() == b.entries_.size() &&
               std::equal(a.entries_.begin(), a.entries_.end(), b.entries_.begin(),
                          [](const Entry& x, const Entry& y) {
                              return x.name == y.name && x.value == y.value;
                          });
    }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

/// A ParameterSet placed on a tape as leaves, addressable by name.
class BoundParameters {
public:
    BoundParameters(Tape& tape, const ParameterSet& params, bool requires_grad);
    /// Names from `params`, values from leaves already on `tape` (same order).
    BoundParameters(Tape& tape, const ParameterSet& params, std::span<const Var> vars);

    Tape& tape() const noexcept { return *tape_; }
    Var operator[](std::string_view name) const;
    bool contains(std::string_view name) const { return params_->contains(name); }
    Var at(std::size_t i) const { return vars_.at(i); }
    std::size_t size() const noexcept { return vars_.size(); }
    /// Gradients in the ParameterSet's order (after tape.backward()).
    std::vector<Matrix> gradients() const;

private:
    Tape* tape_;
    const ParameterSet* params_;
    std::vector<Var> vars_;
};

}  // namespace phsa
