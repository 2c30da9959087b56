#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "phsa/matrix.hpp"

namespace phsa {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode tape. Operations are recorded in execution order and
/// replayed in exact reverse order by backward(). A tape belongs to one
/// thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Matrix value, bool requires_grad = true);
    Var constant(Matrix value) { return leaf(std::move(value), false); }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    /// Gradient of the last backward() target w.r.t. `v`; zeros if `v` was not reached.
    Matrix grad(Var v) const;

    /// Seeds d(target)/d(target) = 1 (target must be 1×1) and runs the
    /// recorded backward functions in reverse order.
    void backward(Var target);

    std::size_t size() const noexcept { return nodes_.size(); }

    // Used by op implementations.
    using BackwardFn = std::function<void(Tape&, const Matrix& upstream)>;
    Var record(Matrix value, std::span<const Var> inputs, BackwardFn backward);
    void accumulate(Var v, const Matrix& g);
    void accumulate(Var v, Matrix&& g);

private:
    struct Node {
        Matrix value;
        std::optional<Matrix> grad;
        BackwardFn backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

// Recording operations. Each is the tape-aware lift of the kernel of the
// same name in ops.hpp.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var swish(Var a);
/// Elementwise PReLU with a trainable 1×1 slope `alpha`.
Var prelu(Var a, Var alpha);
Var softmax_rows(Var s);
Var sum(Var a);
/// Horizontal concatenation; all parts share the row count.
Var concat_cols(std::span<const Var> parts);
/// Per-row normalization to zero mean and unit variance, then gain·x + bias
/// with 1×cols gain and bias rows.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Mean (or sum, when `mean` is false) softmax cross-entropy of each row of
/// `logits` against the class id in `labels`. Returns 1×1.
Var cross_entropy(Var logits, std::span<const int> labels, bool mean = true);

namespace fault {
/// Mutation hook for verification self-tests: when enabled, the PReLU
/// backward pass returns a wrong slope gradient.
void set_corrupt_prelu_backward(bool enabled) noexcept;
bool corrupt_prelu_backward() noexcept;
}  // namespace fault

}  // namespace phsa
