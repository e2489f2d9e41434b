#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "udekit/errors.hpp"

namespace udekit {

// Dense shapes of rank 1 (vector) or 2 (matrix). A scalar is a length-1
// vector. Zero-length vectors are legal and stand in for absent inputs.
struct Shape {
    std::int8_t rank = 1;
    int d0 = 0;
    int d1 = 0;

    static Shape vec(int n) { return Shape{1, n, 0}; }
    static Shape mat(int rows, int cols) { return Shape{2, rows, cols}; }
    static Shape scalar() { return vec(1); }

    int numel() const { return rank == 1 ? d0 : d0 * d1; }
    bool is_scalar() const { return numel() == 1; }
    bool operator==(const Shape& o) const {
        return rank == o.rank && d0 == o.d0 && (rank == 1 || d1 == o.d1);
    }
    std::string str() const;
};

enum class OpKind : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    MatMul,
    Neg,
    Scale,
    Sum,
    Mean,
    Tanh,
    Softplus,
    Exp,
    Log,
    Sin,
    Square,
    Concat,
    Slice,
};

const char* op_name(OpKind op);

struct Node {
    OpKind op = OpKind::Leaf;
    bool requires_grad = false;
    Shape shape;
    std::int32_t a = -1; // first operand node id
    std::int32_t b = -1; // second operand node id
    std::int64_t val = 0; // offset into the tape's value arena
    double aux = 0.0;     // Scale factor
    std::int32_t aux_i = 0; // Slice start / Concat axis
};

class Tape;
struct Param;

// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
struct Tensor {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Shape& shape() const;
    std::span<const double> values() const;
    double scalar_value() const;
    bool requires_grad() const;
};

// Result of a backward pass: one gradient buffer laid out exactly like the
// tape's value arena, addressable per node.
class Gradients {
  public:
    Gradients(const Tape* tape, std::vector<double> buf)
        : tape_(tape), buf_(std::move(buf)) {}

    std::span<const double> at(const Tensor& t) const;
    std::span<const double> at(std::int32_t node_id) const;

  private:
    const Tape* tape_;
    std::vector<double> buf_;
};

// Ordered record of primitive operations over one forward pass. Appending
// order is the topological order; node values live in a single arena so a
// cleared tape re-runs without reallocating. Single-threaded by contract;
// distinct tapes on distinct threads are independent.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // When false, every leaf is recorded without requires-grad and backward
    // information stays dead; used for pure evaluation/simulation passes.
    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    Tensor leaf(const Shape& shape, std::span<const double> values, bool requires_grad = false);
    Tensor constant(double v);
    Tensor constants(std::span<const double> values);
    Tensor zeros(const Shape& shape);

    // Cached leaf for a model parameter: staging the same parameter twice in
    // one pass returns the same node, so shared parameters accumulate one
    // gradient.
    Tensor stage(const Param& p);

    // Leaf previously created by stage(), or an invalid tensor if the pass
    // never staged this parameter.
    Tensor find_staged(const Param& p) const;

    // Reverse-mode sweep from a scalar output. Gradients of requires-grad
    // leaves the output does not depend on are zero.
    Gradients backward(const Tensor& output) const;

    // Recompute every non-leaf node from its inputs, in order. Reproduces
    // the recorded values bit-exactly; exposed for validation.
    void replay();

    void clear();

    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::span<const double> values(std::int32_t id) const;
    std::span<double> values_mut(std::int32_t id);

    Tensor emit(OpKind op, Shape shape, std::int32_t a, std::int32_t b = -1,
                double aux = 0.0, std::int32_t aux_i = 0);

  private:
    friend class Gradients;
    void compute(std::int32_t id);

    std::vector<Node> nodes_;
    std::vector<double> arena_;
    std::unordered_map<const Param*, std::int32_t> staged_;
    bool grad_enabled_ = true;
};

// A named, trainable array of 64-bit reals. Owned by model components;
// must outlive any tape pass that stages it.
struct Param {
    std::string name;
    Shape shape = Shape::vec(0);
    std::vector<double> value;
    bool trainable = true;

    Param() = default;
    Param(std::string n, const Shape& s, double fill = 0.0)
        : name(std::move(n)), shape(s), value(static_cast<std::size_t>(s.numel()), fill) {}

    int numel() const { return shape.numel(); }
};

// ---- primitive operations ------------------------------------------------
// Elementwise ops accept equal shapes or a scalar broadcast on either side.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor square(const Tensor& a);
Tensor concat(const Tensor& a, const Tensor& b, int axis = 0);
Tensor slice(const Tensor& a, int start, int len);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// sigmoid built from the primitive set: 0.5 * tanh(x / 2) + 0.5.
Tensor sigmoid(const Tensor& a);

// Numerically stable scalar helpers shared with backward rules.
double stable_softplus(double x);
double stable_sigmoid(double x);
// Inverse of softplus; maps a target positive value to its raw parameter.
double softplus_inverse(double y);

// ---- gradient checking -----------------------------------------------------

// Max over coordinates of |analytic - central difference| relative error,
// with the denominator floored at 1e-8. `f` is evaluated on fresh tapes.
double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  std::span<const double> x, double step);

// Same check for a function of registered parameters; perturbs the params
// in place and restores them.
double grad_check_params(const std::function<Tensor(Tape&)>& f,
                         std::span<Param* const> params, double step);

} // namespace udekit
