#include "udekit/tensor.hpp"

#include <cmath>
#include <cstdio>

namespace udekit {

std::string Shape::str() const {
    char buf[48];
    if (rank == 1) {
        std::snprintf(buf, sizeof buf, "[%d]", d0);
    } else {
        std::snprintf(buf, sizeof buf, "[%dx%d]", d0, d1);
    }
    return buf;
}

const char* op_name(OpKind op) {
    switch (op) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::MatMul: return "matmul";
        case OpKind::Neg: return "neg";
        case OpKind::Scale: return "scale";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::Tanh: return "tanh";
        case OpKind::Softplus: return "softplus";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Sin: return "sin";
        case OpKind::Square: return "square";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
    }
    return "?";
}

double stable_softplus(double x) {
    return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_inverse(double y) {
    if (!(y > 0.0)) throw ParamError("softplus_inverse: value must be positive, got " + std::to_string(y));
    if (y > 30.0) return y; // softplus(y) == y to double precision
    return std::log(std::expm1(y));
}

// ---- Tensor accessors ------------------------------------------------------

const Shape& Tensor::shape() const { return tape->node(id).shape; }

std::span<const double> Tensor::values() const { return tape->values(id); }

double Tensor::scalar_value() const {
    auto v = values();
    if (v.size() != 1) {
        throw ShapeError(std::string("scalar_value: tensor has shape ") + shape().str());
    }
    return v[0];
}

bool Tensor::requires_grad() const { return tape->node(id).requires_grad; }

// ---- Gradients ---------------------------------------------------------------

std::span<const double> Gradients::at(const Tensor& t) const { return at(t.id); }

std::span<const double> Gradients::at(std::int32_t node_id) const {
    const Node& n = tape_->node(node_id);
    return {buf_.data() + n.val, static_cast<std::size_t>(n.shape.numel())};
}

// ---- Tape ----------------------------------------------------------------

std::span<const double> Tape::values(std::int32_t id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return {arena_.data() + n.val, static_cast<std::size_t>(n.shape.numel())};
}

std::span<double> Tape::values_mut(std::int32_t id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return {arena_.data() + n.val, static_cast<std::size_t>(n.shape.numel())};
}

Tensor Tape::emit(OpKind op, Shape shape, std::int32_t a, std::int32_t b,
                  double aux, std::int32_t aux_i) {
    Node n;
    n.op = op;
    n.shape = shape;
    n.a = a;
    n.b = b;
    n.aux = aux;
    n.aux_i = aux_i;
    n.val = static_cast<std::int64_t>(arena_.size());
    bool rg = false;
    if (a >= 0) rg = rg || nodes_[static_cast<std::size_t>(a)].requires_grad;
    if (b >= 0) rg = rg || nodes_[static_cast<std::size_t>(b)].requires_grad;
    n.requires_grad = rg && grad_enabled_;
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(n);
    arena_.resize(arena_.size() + static_cast<std::size_t>(shape.numel()));
    if (op != OpKind::Leaf) compute(id);
    return Tensor{this, id};
}

Tensor Tape::leaf(const Shape& shape, std::span<const double> values, bool requires_grad) {
    if (static_cast<int>(values.size()) != shape.numel()) {
        throw ShapeError("leaf: " + std::to_string(values.size()) + " values for shape " + shape.str());
    }
    Tensor t = emit(OpKind::Leaf, shape, -1, -1);
    nodes_[static_cast<std::size_t>(t.id)].requires_grad = requires_grad && grad_enabled_;
    auto dst = values_mut(t.id);
    for (std::size_t i = 0; i < values.size(); ++i) dst[i] = values[i];
    return t;
}

Tensor Tape::constant(double v) { return leaf(Shape::scalar(), {&v, 1}, false); }

Tensor Tape::constants(std::span<const double> values) {
    return leaf(Shape::vec(static_cast<int>(values.size())), values, false);
}

Tensor Tape::zeros(const Shape& shape) {
    Tensor t = emit(OpKind::Leaf, shape, -1, -1);
    auto dst = values_mut(t.id);
    for (double& x : dst) x = 0.0;
    return t;
}

Tensor Tape::stage(const Param& p) {
    auto it = staged_.find(&p);
    if (it != staged_.end()) return Tensor{this, it->second};
    Tensor t = leaf(p.shape, p.value, p.trainable);
    staged_.emplace(&p, t.id);
    return t;
}

Tensor Tape::find_staged(const Param& p) const {
    auto it = staged_.find(&p);
    if (it == staged_.end()) return Tensor{nullptr, -1};
    return Tensor{const_cast<Tape*>(this), it->second};
}

void Tape::clear() {
    nodes_.clear();
    arena_.clear();
    staged_.clear();
}

// ---- forward kernels ---------------------------------------------------------

namespace {

// For elementwise ops: which operand broadcasts (0 = none, 1 = a, 2 = b).
int broadcast_side(const Shape& a, const Shape& b) {
    if (a == b) return 0;
    if (a.is_scalar()) return 1;
    if (b.is_scalar()) return 2;
    return -1;
}

} // namespace

void Tape::compute(std::int32_t id) {
    const Node n = nodes_[static_cast<std::size_t>(id)];
    auto out = values_mut(id);
    const int numel = n.shape.numel();
    switch (n.op) {
        case OpKind::Leaf:
            break;
        case OpKind::Add:
        case OpKind::Sub:
        case OpKind::Mul: {
            auto av = values(n.a);
            auto bv = values(n.b);
            const int bc = broadcast_side(nodes_[static_cast<std::size_t>(n.a)].shape,
                                          nodes_[static_cast<std::size_t>(n.b)].shape);
            for (int i = 0; i < numel; ++i) {
                const double x = bc == 1 ? av[0] : av[static_cast<std::size_t>(i)];
                const double y = bc == 2 ? bv[0] : bv[static_cast<std::size_t>(i)];
                out[static_cast<std::size_t>(i)] =
                    n.op == OpKind::Add ? x + y : (n.op == OpKind::Sub ? x - y : x * y);
            }
            break;
        }
        case OpKind::MatMul: {
            const Node& na = nodes_[static_cast<std::size_t>(n.a)];
            const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
            auto av = values(n.a);
            auto bv = values(n.b);
            const int r = na.shape.d0, c = na.shape.d1;
            if (nb.shape.rank == 1) {
                for (int i = 0; i < r; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < c; ++j)
                        acc += av[static_cast<std::size_t>(i * c + j)] * bv[static_cast<std::size_t>(j)];
                    out[static_cast<std::size_t>(i)] = acc;
                }
            } else {
                const int k = nb.shape.d1;
                for (int i = 0; i < r; ++i) {
                    for (int q = 0; q < k; ++q) {
                        double acc = 0.0;
                        for (int j = 0; j < c; ++j)
                            acc += av[static_cast<std::size_t>(i * c + j)] *
                                   bv[static_cast<std::size_t>(j * k + q)];
                        out[static_cast<std::size_t>(i * k + q)] = acc;
                    }
                }
            }
            break;
        }
        case OpKind::Neg: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) out[static_cast<std::size_t>(i)] = -av[static_cast<std::size_t>(i)];
            break;
        }
        case OpKind::Scale: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) out[static_cast<std::size_t>(i)] = n.aux * av[static_cast<std::size_t>(i)];
            break;
        }
        case OpKind::Sum: {
            auto av = values(n.a);
            double acc = 0.0;
            for (double x : av) acc += x;
            out[0] = acc;
            break;
        }
        case OpKind::Mean: {
            auto av = values(n.a);
            double acc = 0.0;
            for (double x : av) acc += x;
            out[0] = acc / static_cast<double>(av.size());
            break;
        }
        case OpKind::Tanh: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) out[static_cast<std::size_t>(i)] = std::tanh(av[static_cast<std::size_t>(i)]);
            break;
        }
        case OpKind::Softplus: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) out[static_cast<std::size_t>(i)] = stable_softplus(av[static_cast<std::size_t>(i)]);
            break;
        }
        case OpKind::Exp: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) out[static_cast<std::size_t>(i)] = std::exp(av[static_cast<std::size_t>(i)]);
            break;
        }
        case OpKind::Log: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) {
                const double x = av[static_cast<std::size_t>(i)];
                if (!(x > 0.0)) {
                    throw DomainError("log: non-positive value " + std::to_string(x) +
                                      " at index " + std::to_string(i));
                }
                out[static_cast<std::size_t>(i)] = std::log(x);
            }
            break;
        }
        case OpKind::Sin: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) out[static_cast<std::size_t>(i)] = std::sin(av[static_cast<std::size_t>(i)]);
            break;
        }
        case OpKind::Square: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i) {
                const double x = av[static_cast<std::size_t>(i)];
                out[static_cast<std::size_t>(i)] = x * x;
            }
            break;
        }
        case OpKind::Concat: {
            const Node& na = nodes_[static_cast<std::size_t>(n.a)];
            const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
            auto av = values(n.a);
            auto bv = values(n.b);
            if (n.shape.rank == 1 || n.aux_i == 0) {
                // axis 0: contiguous in row-major layout
                std::size_t k = 0;
                for (double x : av) out[k++] = x;
                for (double x : bv) out[k++] = x;
            } else {
                const int rows = n.shape.d0, ca = na.shape.d1, cb = nb.shape.d1;
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < ca; ++j)
                        out[static_cast<std::size_t>(i * (ca + cb) + j)] = av[static_cast<std::size_t>(i * ca + j)];
                    for (int j = 0; j < cb; ++j)
                        out[static_cast<std::size_t>(i * (ca + cb) + ca + j)] = bv[static_cast<std::size_t>(i * cb + j)];
                }
            }
            break;
        }
        case OpKind::Slice: {
            auto av = values(n.a);
            for (int i = 0; i < numel; ++i)
                out[static_cast<std::size_t>(i)] = av[static_cast<std::size_t>(n.aux_i + i)];
            break;
        }
    }
}

void Tape::replay() {
    for (std::int32_t id = 0; id < static_cast<std::int32_t>(nodes_.size()); ++id) {
        if (nodes_[static_cast<std::size_t>(id)].op != OpKind::Leaf) compute(id);
    }
}

// ---- backward -----------------------------------------------------------------

Gradients Tape::backward(const Tensor& output) const {
    if (output.tape != this) throw ParamError("backward: output is not on this tape");
    if (!output.shape().is_scalar()) {
        throw ParamError(std::string("backward: output must be a scalar, got shape ") +
                         output.shape().str());
    }
    std::vector<double> grad(arena_.size(), 0.0);
    const Node& on = nodes_[static_cast<std::size_t>(output.id)];
    grad[static_cast<std::size_t>(on.val)] = 1.0;

    auto g_of = [&](std::int32_t id) -> double* {
        return grad.data() + nodes_[static_cast<std::size_t>(id)].val;
    };

    for (std::int32_t id = output.id; id >= 0; --id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.op == OpKind::Leaf) continue;
        const double* g = grad.data() + n.val;
        const int numel = n.shape.numel();
        const bool need_a = n.a >= 0 && nodes_[static_cast<std::size_t>(n.a)].requires_grad;
        const bool need_b = n.b >= 0 && nodes_[static_cast<std::size_t>(n.b)].requires_grad;
        switch (n.op) {
            case OpKind::Leaf:
                break;
            case OpKind::Add:
            case OpKind::Sub: {
                const int bc = broadcast_side(nodes_[static_cast<std::size_t>(n.a)].shape,
                                              nodes_[static_cast<std::size_t>(n.b)].shape);
                const double sgn = n.op == OpKind::Sub ? -1.0 : 1.0;
                if (need_a) {
                    double* ga = g_of(n.a);
                    if (bc == 1)
                        for (int i = 0; i < numel; ++i) ga[0] += g[i];
                    else
                        for (int i = 0; i < numel; ++i) ga[i] += g[i];
                }
                if (need_b) {
                    double* gb = g_of(n.b);
                    if (bc == 2)
                        for (int i = 0; i < numel; ++i) gb[0] += sgn * g[i];
                    else
                        for (int i = 0; i < numel; ++i) gb[i] += sgn * g[i];
                }
                break;
            }
            case OpKind::Mul: {
                const int bc = broadcast_side(nodes_[static_cast<std::size_t>(n.a)].shape,
                                              nodes_[static_cast<std::size_t>(n.b)].shape);
                auto av = values(n.a);
                auto bv = values(n.b);
                if (need_a) {
                    double* ga = g_of(n.a);
                    for (int i = 0; i < numel; ++i) {
                        const double y = bc == 2 ? bv[0] : bv[static_cast<std::size_t>(i)];
                        ga[bc == 1 ? 0 : i] += g[i] * y;
                    }
                }
                if (need_b) {
                    double* gb = g_of(n.b);
                    for (int i = 0; i < numel; ++i) {
                        const double x = bc == 1 ? av[0] : av[static_cast<std::size_t>(i)];
                        gb[bc == 2 ? 0 : i] += g[i] * x;
                    }
                }
                break;
            }
            case OpKind::MatMul: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                auto av = values(n.a);
                auto bv = values(n.b);
                const int r = na.shape.d0, c = na.shape.d1;
                if (nb.shape.rank == 1) {
                    if (need_a) {
                        double* ga = g_of(n.a);
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j)
                                ga[i * c + j] += g[i] * bv[static_cast<std::size_t>(j)];
                    }
                    if (need_b) {
                        double* gb = g_of(n.b);
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j)
                                gb[j] += av[static_cast<std::size_t>(i * c + j)] * g[i];
                    }
                } else {
                    const int k = nb.shape.d1;
                    if (need_a) {
                        double* ga = g_of(n.a);
                        for (int i = 0; i < r; ++i)
                            for (int j = 0; j < c; ++j) {
                                double acc = 0.0;
                                for (int q = 0; q < k; ++q)
                                    acc += g[i * k + q] * bv[static_cast<std::size_t>(j * k + q)];
                                ga[i * c + j] += acc;
                            }
                    }
                    if (need_b) {
                        double* gb = g_of(n.b);
                        for (int j = 0; j < c; ++j)
                            for (int q = 0; q < k; ++q) {
                                double acc = 0.0;
                                for (int i = 0; i < r; ++i)
                                    acc += av[static_cast<std::size_t>(i * c + j)] * g[i * k + q];
                                gb[j * k + q] += acc;
                            }
                    }
                }
                break;
            }
            case OpKind::Neg: {
                double* ga = g_of(n.a);
                for (int i = 0; i < numel; ++i) ga[i] -= g[i];
                break;
            }
            case OpKind::Scale: {
                double* ga = g_of(n.a);
                for (int i = 0; i < numel; ++i) ga[i] += n.aux * g[i];
                break;
            }
            case OpKind::Sum: {
                double* ga = g_of(n.a);
                const int an = nodes_[static_cast<std::size_t>(n.a)].shape.numel();
                for (int i = 0; i < an; ++i) ga[i] += g[0];
                break;
            }
            case OpKind::Mean: {
                double* ga = g_of(n.a);
                const int an = nodes_[static_cast<std::size_t>(n.a)].shape.numel();
                const double w = g[0] / static_cast<double>(an);
                for (int i = 0; i < an; ++i) ga[i] += w;
                break;
            }
            case OpKind::Tanh: {
                double* ga = g_of(n.a);
                const double* y = arena_.data() + n.val;
                for (int i = 0; i < numel; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                break;
            }
            case OpKind::Softplus: {
                double* ga = g_of(n.a);
                auto av = values(n.a);
                for (int i = 0; i < numel; ++i)
                    ga[i] += g[i] * stable_sigmoid(av[static_cast<std::size_t>(i)]);
                break;
            }
            case OpKind::Exp: {
                double* ga = g_of(n.a);
                const double* y = arena_.data() + n.val;
                for (int i = 0; i < numel; ++i) ga[i] += g[i] * y[i];
                break;
            }
            case OpKind::Log: {
                double* ga = g_of(n.a);
                auto av = values(n.a);
                for (int i = 0; i < numel; ++i) ga[i] += g[i] / av[static_cast<std::size_t>(i)];
                break;
            }
            case OpKind::Sin: {
                double* ga = g_of(n.a);
                auto av = values(n.a);
                for (int i = 0; i < numel; ++i) ga[i] += g[i] * std::cos(av[static_cast<std::size_t>(i)]);
                break;
            }
            case OpKind::Square: {
                double* ga = g_of(n.a);
                auto av = values(n.a);
                for (int i = 0; i < numel; ++i) ga[i] += g[i] * 2.0 * av[static_cast<std::size_t>(i)];
                break;
            }
            case OpKind::Concat: {
                const Node& na = nodes_[static_cast<std::size_t>(n.a)];
                const Node& nb = nodes_[static_cast<std::size_t>(n.b)];
                if (n.shape.rank == 1 || n.aux_i == 0) {
                    const int an = na.shape.numel();
                    const int bn = nb.shape.numel();
                    if (need_a) {
                        double* ga = g_of(n.a);
                        for (int i = 0; i < an; ++i) ga[i] += g[i];
                    }
                    if (need_b) {
                        double* gb = g_of(n.b);
                        for (int i = 0; i < bn; ++i) gb[i] += g[an + i];
                    }
                } else {
                    const int rows = n.shape.d0, ca = na.shape.d1, cb = nb.shape.d1;
                    if (need_a) {
                        double* ga = g_of(n.a);
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < ca; ++j)
                                ga[i * ca + j] += g[i * (ca + cb) + j];
                    }
                    if (need_b) {
                        double* gb = g_of(n.b);
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < cb; ++j)
                                gb[i * cb + j] += g[i * (ca + cb) + ca + j];
                    }
                }
                break;
            }
            case OpKind::Slice: {
                double* ga = g_of(n.a);
                for (int i = 0; i < numel; ++i) ga[n.aux_i + i] += g[i];
                break;
            }
        }
    }
    return Gradients(this, std::move(grad));
}

// ---- op constructors ------------------------------------------------------------

namespace {

Tape* common_tape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.valid() || !b.valid()) throw ParamError(std::string(op) + ": invalid tensor operand");
    if (a.tape != b.tape) throw ParamError(std::string(op) + ": operands live on different tapes");
    return a.tape;
}

Tensor elementwise(OpKind op, const Tensor& a, const Tensor& b) {
    Tape* tape = common_tape(a, b, op_name(op));
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const int bc = broadcast_side(sa, sb);
    if (bc < 0) {
        throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + sa.str() + " vs " + sb.str());
    }
    const Shape& out = bc == 1 ? sb : sa;
    return tape->emit(op, out, a.id, b.id);
}

Tensor unary(OpKind op, const Tensor& a) {
    if (!a.valid()) throw ParamError(std::string(op_name(op)) + ": invalid tensor operand");
    return a.tape->emit(op, a.shape(), a.id);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(OpKind::Mul, a, b); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    Tape* tape = common_tape(a, b, "matmul");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank != 2) {
        throw ShapeError("matmul: left operand must be a matrix, got " + sa.str());
    }
    if (sb.rank == 1) {
        if (sb.d0 != sa.d1) {
            throw ShapeError("matmul: inner dimensions mismatch " + sa.str() + " vs " + sb.str());
        }
        return tape->emit(OpKind::MatMul, Shape::vec(sa.d0), a.id, b.id);
    }
    if (sb.d0 != sa.d1) {
        throw ShapeError("matmul: inner dimensions mismatch " + sa.str() + " vs " + sb.str());
    }
    return tape->emit(OpKind::MatMul, Shape::mat(sa.d0, sb.d1), a.id, b.id);
}

Tensor neg(const Tensor& a) { return unary(OpKind::Neg, a); }

Tensor scale(const Tensor& a, double factor) {
    if (!a.valid()) throw ParamError("scale: invalid tensor operand");
    return a.tape->emit(OpKind::Scale, a.shape(), a.id, -1, factor);
}

Tensor sum(const Tensor& a) {
    if (!a.valid()) throw ParamError("sum: invalid tensor operand");
    return a.tape->emit(OpKind::Sum, Shape::scalar(), a.id);
}

Tensor mean(const Tensor& a) {
    if (!a.valid()) throw ParamError("mean: invalid tensor operand");
    if (a.shape().numel() == 0) throw ParamError("mean: empty tensor");
    return a.tape->emit(OpKind::Mean, Shape::scalar(), a.id);
}

Tensor tanh(const Tensor& a) { return unary(OpKind::Tanh, a); }
Tensor softplus(const Tensor& a) { return unary(OpKind::Softplus, a); }
Tensor exp(const Tensor& a) { return unary(OpKind::Exp, a); }
Tensor log(const Tensor& a) { return unary(OpKind::Log, a); }
Tensor sin(const Tensor& a) { return unary(OpKind::Sin, a); }
Tensor square(const Tensor& a) { return unary(OpKind::Square, a); }

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    Tape* tape = common_tape(a, b, "concat");
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank != sb.rank) {
        throw ShapeError("concat: rank mismatch " + sa.str() + " vs " + sb.str());
    }
    if (sa.rank == 1) {
        if (axis != 0) throw ParamError("concat: axis must be 0 for vectors");
        return tape->emit(OpKind::Concat, Shape::vec(sa.d0 + sb.d0), a.id, b.id, 0.0, 0);
    }
    if (axis == 0) {
        if (sa.d1 != sb.d1) {
            throw ShapeError("concat: column mismatch " + sa.str() + " vs " + sb.str());
        }
        return tape->emit(OpKind::Concat, Shape::mat(sa.d0 + sb.d0, sa.d1), a.id, b.id, 0.0, 0);
    }
    if (axis == 1) {
        if (sa.d0 != sb.d0) {
            throw ShapeError("concat: row mismatch " + sa.str() + " vs " + sb.str());
        }
        return tape->emit(OpKind::Concat, Shape::mat(sa.d0, sa.d1 + sb.d1), a.id, b.id, 0.0, 1);
    }
    throw ParamError("concat: axis must be 0 or 1");
}

Tensor slice(const Tensor& a, int start, int len) {
    if (!a.valid()) throw ParamError("slice: invalid tensor operand");
    const Shape& sa = a.shape();
    if (sa.rank != 1) throw ShapeError("slice: operand must be a vector, got " + sa.str());
    if (start < 0 || len < 0 || start + len > sa.d0) {
        throw ParamError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for " + sa.str());
    }
    return a.tape->emit(OpKind::Slice, Shape::vec(len), a.id, -1, 0.0, start);
}

Tensor sigmoid(const Tensor& a) {
    Tensor half = a.tape->constant(0.5);
    return add(scale(tanh(scale(a, 0.5)), 0.5), half);
}

// ---- gradient checking ----------------------------------------------------------

namespace {

double rel_err(double analytic, double numeric) {
    const double denom = std::fmax(std::fmax(std::fabs(analytic), std::fabs(numeric)), 1e-8);
    return std::fabs(analytic - numeric) / denom;
}

} // namespace

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  std::span<const double> x, double step) {
    if (!(step > 0.0)) throw ParamError("grad_check: step must be positive");
    const Shape shape = Shape::vec(static_cast<int>(x.size()));

    std::vector<double> analytic(x.size());
    {
        Tape tape;
        Tensor xin = tape.leaf(shape, x, true);
        Tensor y = f(tape, xin);
        if (!y.shape().is_scalar()) {
            throw ParamError("grad_check: f must return a scalar, got " + y.shape().str());
        }
        Gradients g = tape.backward(y);
        auto gx = g.at(xin);
        for (std::size_t i = 0; i < x.size(); ++i) analytic[i] = gx[i];
    }

    auto eval_at = [&](std::span<const double> pt, std::size_t coord) {
        Tape tape;
        tape.set_grad_enabled(false);
        Tensor xin = tape.leaf(shape, pt, false);
        const double v = f(tape, xin).scalar_value();
        if (!std::isfinite(v)) {
            throw DomainError("grad_check: non-finite value while probing coordinate " +
                              std::to_string(coord));
        }
        return v;
    };

    double worst = 0.0;
    std::vector<double> pt(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = pt[i];
        pt[i] = orig + step;
        const double fp = eval_at(pt, i);
        pt[i] = orig - step;
        const double fm = eval_at(pt, i);
        pt[i] = orig;
        const double numeric = (fp - fm) / (2.0 * step);
        worst = std::fmax(worst, rel_err(analytic[i], numeric));
    }
    return worst;
}

double grad_check_params(const std::function<Tensor(Tape&)>& f,
                         std::span<Param* const> params, double step) {
    if (!(step > 0.0)) throw ParamError("grad_check_params: step must be positive");

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tensor y = f(tape);
        if (!y.shape().is_scalar()) {
            throw ParamError("grad_check_params: f must return a scalar, got " + y.shape().str());
        }
        // Stage every parameter before the sweep; one f never used stays a
        // fresh leaf and reads back a zero gradient.
        std::vector<Tensor> leaves;
        leaves.reserve(params.size());
        for (Param* p : params) leaves.push_back(tape.stage(*p));
        Gradients g = tape.backward(y);
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            auto gv = g.at(leaves[pi]);
            analytic.emplace_back(gv.begin(), gv.end());
        }
    }

    auto eval = [&]() {
        Tape tape;
        tape.set_grad_enabled(false);
        const double v = f(tape).scalar_value();
        if (!std::isfinite(v)) throw DomainError("grad_check_params: non-finite value while probing");
        return v;
    };

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param* p = params[pi];
        for (int i = 0; i < p->numel(); ++i) {
            const double orig = p->value[static_cast<std::size_t>(i)];
            p->value[static_cast<std::size_t>(i)] = orig + step;
            const double fp = eval();
            p->value[static_cast<std::size_t>(i)] = orig - step;
            const double fm = eval();
            p->value[static_cast<std::size_t>(i)] = orig;
            const double numeric = (fp - fm) / (2.0 * step);
            worst = std::fmax(worst, rel_err(analytic[pi][static_cast<std::size_t>(i)], numeric));
        }
    }
    return worst;
}

} // namespace udekit
