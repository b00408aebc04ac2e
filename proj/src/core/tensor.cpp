#include "core/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "core/kernels.hpp"

namespace pdedpc::ad {

namespace {

using kernels::gemm_acc_nn;
using kernels::gemm_acc_nt;
using kernels::gemm_acc_tn;
using kernels::sigmoid;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

void require_same_tape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.tape() != b.tape()) fail(std::string(op) + ": operands live on different tapes");
}

bool is_scalar(const Tensor& t) { return t.numel() == 1; }

// rows/cols with rank-1 tensors viewed as a single row
int eff_rows(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
int eff_cols(const Shape& s) {
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    return 1;
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

const Shape& Tensor::shape() const { return tape_->node(id_).shape; }
std::size_t Tensor::numel() const { return tape_->node(id_).values.size(); }
int Tensor::rows() const { return eff_rows(shape()); }
int Tensor::cols() const { return eff_cols(shape()); }
bool Tensor::requires_grad() const { return tape_->node(id_).requires_grad; }

std::span<const double> Tensor::values() const { return tape_->node(id_).values; }
std::span<double> Tensor::values_mut() { return tape_->node(id_).values; }
std::span<const double> Tensor::grad() const { return tape_->node(id_).grad; }

double Tensor::value() const {
    if (numel() != 1) fail("value(): tensor " + shape_str(shape()) + " is not scalar");
    return tape_->node(id_).values[0];
}

double Tensor::grad_value() const {
    if (numel() != 1) fail("grad_value(): tensor is not scalar");
    const auto& g = tape_->node(id_).grad;
    return g.empty() ? 0.0 : g[0];
}

Tensor Tape::emit(Node&& node) {
    nodes_.push_back(std::move(node));
    return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor Tape::leaf(const Shape& shape, std::span<const double> values, bool requires_grad) {
    return leaf(shape, std::vector<double>(values.begin(), values.end()), requires_grad);
}

Tensor Tape::leaf(const Shape& shape, std::vector<double> values, bool requires_grad) {
    if (values.size() != numel_of(shape))
        fail("leaf: " + std::to_string(values.size()) + " values for shape " + shape_str(shape));
    Node n;
    n.op = OpKind::Leaf;
    n.shape = shape;
    n.values = std::move(values);
    n.requires_grad = requires_grad;
    return emit(std::move(n));
}

Tensor Tape::zeros(const Shape& shape, bool requires_grad) {
    return leaf(shape, std::vector<double>(numel_of(shape), 0.0), requires_grad);
}

Tensor Tape::scalar(double value, bool requires_grad) {
    return leaf(Shape{}, std::vector<double>{value}, requires_grad);
}

void Tape::zero_grad() {
    for (auto& n : nodes_) n.grad.clear();
}

namespace {

Node make_node(OpKind op, const Tensor& a, Shape shape) {
    Node n;
    n.op = op;
    n.a = a.id();
    n.shape = std::move(shape);
    n.values.resize(numel_of(n.shape));
    n.requires_grad = a.requires_grad();
    return n;
}

Node make_node(OpKind op, const Tensor& a, const Tensor& b, Shape shape) {
    Node n = make_node(op, a, std::move(shape));
    n.b = b.id();
    n.requires_grad = n.requires_grad || b.requires_grad();
    return n;
}

// Elementwise binary with optional scalar operand on either side.
template <class F>
Tensor binary_elemwise(OpKind op, const Tensor& a, const Tensor& b, F&& f, const char* name) {
    require_same_tape(a, b, name);
    const bool sa = is_scalar(a);
    const bool sb = is_scalar(b);
    if (!sa && !sb && a.shape() != b.shape())
        fail(std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    const Shape& out_shape = sa ? b.shape() : a.shape();
    Node n = make_node(op, a, b, out_shape);
    const auto av = a.values();
    const auto bv = b.values();
    const std::size_t count = n.values.size();
    for (std::size_t i = 0; i < count; ++i)
        n.values[i] = f(av[sa ? 0 : i], bv[sb ? 0 : i]);
    return a.tape()->emit(std::move(n));
}

template <class F>
Tensor unary_elemwise(OpKind op, const Tensor& a, F&& f) {
    Node n = make_node(op, a, a.shape());
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) n.values[i] = f(av[i]);
    return a.tape()->emit(std::move(n));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elemwise(OpKind::Add, a, b, [](double x, double y) { return x + y; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elemwise(OpKind::Sub, a, b, [](double x, double y) { return x - y; }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elemwise(OpKind::Mul, a, b, [](double x, double y) { return x * y; }, "mul");
}

Tensor add_scalar(const Tensor& a, double constant) {
    Node n = make_node(OpKind::AddScalar, a, a.shape());
    n.scalar = constant;
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) n.values[i] = av[i] + constant;
    return a.tape()->emit(std::move(n));
}

Tensor scale(const Tensor& a, double factor) {
    Node n = make_node(OpKind::Scale, a, a.shape());
    n.scalar = factor;
    const auto av = a.values();
    for (std::size_t i = 0; i < av.size(); ++i) n.values[i] = av[i] * factor;
    return a.tape()->emit(std::move(n));
}

Tensor negate(const Tensor& a) {
    return unary_elemwise(OpKind::Negate, a, [](double x) { return -x; });
}

Tensor square(const Tensor& a) {
    return unary_elemwise(OpKind::Square, a, [](double x) { return x * x; });
}

Tensor tanh(const Tensor& a) {
    return unary_elemwise(OpKind::Tanh, a, [](double x) { return std::tanh(x); });
}

Tensor silu(const Tensor& a) {
    return unary_elemwise(OpKind::Silu, a, [](double x) { return x * sigmoid(x); });
}

Tensor relu(const Tensor& a) {
    return unary_elemwise(OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Tensor row_affine(const Tensor& x, std::span<const double> col_scale,
                  std::span<const double> col_shift) {
    const int cols = eff_cols(x.shape());
    if (static_cast<int>(col_scale.size()) != cols || static_cast<int>(col_shift.size()) != cols)
        fail("row_affine: vectors of length " + std::to_string(col_scale.size()) +
             " for tensor " + shape_str(x.shape()));
    Node n = make_node(OpKind::RowAffine, x, x.shape());
    n.row_scale.assign(col_scale.begin(), col_scale.end());
    n.row_shift.assign(col_shift.begin(), col_shift.end());
    const int rows = eff_rows(x.shape());
    const auto xv = x.values();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * cols + c;
            n.values[i] = xv[i] * col_scale[c] + col_shift[c];
        }
    return x.tape()->emit(std::move(n));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "matmul");
    if (a.shape().size() != 2 || b.shape().size() != 2)
        fail("matmul: rank-2 operands required, got " + shape_str(a.shape()) + " and " +
             shape_str(b.shape()));
    const int m = a.shape()[0], k = a.shape()[1];
    const int k2 = b.shape()[0], n_cols = b.shape()[1];
    if (k != k2)
        fail("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
             shape_str(b.shape()));
    Node n = make_node(OpKind::MatMul, a, b, Shape{m, n_cols});
    gemm_acc_nn(n.values.data(), a.values().data(), b.values().data(), m, k, n_cols);
    return a.tape()->emit(std::move(n));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require_same_tape(x, w, "linear");
    require_same_tape(x, bias, "linear");
    if (w.shape().size() != 2) fail("linear: weight must be rank-2, got " + shape_str(w.shape()));
    const int in = w.shape()[0], out = w.shape()[1];
    if (eff_cols(x.shape()) != in)
        fail("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
             shape_str(w.shape()));
    if (static_cast<int>(bias.numel()) != out)
        fail("linear: bias " + shape_str(bias.shape()) + " incompatible with weight " +
             shape_str(w.shape()));
    const int rows = eff_rows(x.shape());
    Node n = make_node(OpKind::Linear, x, w, Shape{rows, out});
    n.c = bias.id();
    n.requires_grad = n.requires_grad || bias.requires_grad();
    const auto bv = bias.values();
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < out; ++j) n.values[static_cast<std::size_t>(r) * out + j] = bv[j];
    gemm_acc_nn(n.values.data(), x.values().data(), w.values().data(), rows, in, out);
    return x.tape()->emit(std::move(n));
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) fail("transpose: rank-2 required, got " + shape_str(a.shape()));
    const int m = a.shape()[0], n_cols = a.shape()[1];
    Node n = make_node(OpKind::Transpose, a, Shape{n_cols, m});
    const auto av = a.values();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n_cols; ++j)
            n.values[static_cast<std::size_t>(j) * m + i] = av[static_cast<std::size_t>(i) * n_cols + j];
    return a.tape()->emit(std::move(n));
}

Tensor sum_all(const Tensor& a) {
    Node n = make_node(OpKind::SumAll, a, Shape{});
    double acc = 0.0;
    for (double v : a.values()) acc += v;
    n.values[0] = acc;
    return a.tape()->emit(std::move(n));
}

Tensor sum_axis(const Tensor& a, int axis) {
    if (a.shape().size() != 2) fail("sum_axis: rank-2 required, got " + shape_str(a.shape()));
    if (axis != 0 && axis != 1) fail("sum_axis: axis " + std::to_string(axis) + " out of range");
    const int m = a.shape()[0], n_cols = a.shape()[1];
    const auto av = a.values();
    if (axis == 0) {
        Node n = make_node(OpKind::SumAxis0, a, Shape{n_cols});
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n_cols; ++j) n.values[j] += av[static_cast<std::size_t>(i) * n_cols + j];
        return a.tape()->emit(std::move(n));
    }
    Node n = make_node(OpKind::SumAxis1, a, Shape{m});
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n_cols; ++j) acc += av[static_cast<std::size_t>(i) * n_cols + j];
        n.values[i] = acc;
    }
    return a.tape()->emit(std::move(n));
}

Tensor mean_all(const Tensor& a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "concat_cols");
    if (a.shape().size() != b.shape().size())
        fail("concat_cols: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    if (a.shape().size() == 1) {
        Node n = make_node(OpKind::ConcatCols, a, b, Shape{a.shape()[0] + b.shape()[0]});
        std::copy(a.values().begin(), a.values().end(), n.values.begin());
        std::copy(b.values().begin(), b.values().end(), n.values.begin() + a.shape()[0]);
        return a.tape()->emit(std::move(n));
    }
    if (a.shape().size() != 2 || a.shape()[0] != b.shape()[0])
        fail("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int rows = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
    Node n = make_node(OpKind::ConcatCols, a, b, Shape{rows, ca + cb});
    const auto av = a.values();
    const auto bv = b.values();
    for (int r = 0; r < rows; ++r) {
        double* dst = n.values.data() + static_cast<std::size_t>(r) * (ca + cb);
        const double* sa = av.data() + static_cast<std::size_t>(r) * ca;
        const double* sb = bv.data() + static_cast<std::size_t>(r) * cb;
        std::copy(sa, sa + ca, dst);
        std::copy(sb, sb + cb, dst + ca);
    }
    return a.tape()->emit(std::move(n));
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (numel_of(shape) != a.numel())
        fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    Node n = make_node(OpKind::Reshape, a, shape);
    std::copy(a.values().begin(), a.values().end(), n.values.begin());
    return a.tape()->emit(std::move(n));
}

Tensor apply_elementwise(ElemKind kind, const Tensor& a, const std::optional<Tensor>& b,
                         double constant) {
    switch (kind) {
        case ElemKind::Add: return add(a, *b);
        case ElemKind::Sub: return sub(a, *b);
        case ElemKind::Mul: return mul(a, *b);
        case ElemKind::Square: return square(a);
        case ElemKind::Tanh: return tanh(a);
        case ElemKind::Silu: return silu(a);
        case ElemKind::Relu: return relu(a);
        case ElemKind::Scale: return scale(a, constant);
        case ElemKind::Negate: return negate(a);
    }
    fail("apply_elementwise: unknown kind");
}

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void ensure_grad(Node& n) {
    if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
}

}  // namespace

void Tape::backward(const Tensor& loss) {
    if (loss.tape() != this) fail("backward: loss is not on this tape");
    if (loss.numel() != 1)
        fail("backward: loss must be scalar, got " + shape_str(loss.shape()));
    ensure_grad(node(loss.id()));
    node(loss.id()).grad[0] += 1.0;

    for (int id = loss.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.empty() || n.op == OpKind::Leaf || !n.requires_grad) continue;
        const std::vector<double>& g = n.grad;
        Node* na = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
        Node* nb = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)] : nullptr;
        Node* nc = n.c >= 0 ? &nodes_[static_cast<std::size_t>(n.c)] : nullptr;
        const bool wa = na && na->requires_grad;
        const bool wb = nb && nb->requires_grad;
        const bool wc = nc && nc->requires_grad;
        if (wa) ensure_grad(*na);
        if (wb) ensure_grad(*nb);
        if (wc) ensure_grad(*nc);

        switch (n.op) {
            case OpKind::Add:
            case OpKind::Sub: {
                const double sb = n.op == OpKind::Sub ? -1.0 : 1.0;
                if (wa) {
                    if (na->values.size() == 1)
                        for (double gv : g) na->grad[0] += gv;
                    else
                        for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] += g[i];
                }
                if (wb) {
                    if (nb->values.size() == 1)
                        for (double gv : g) nb->grad[0] += sb * gv;
                    else
                        for (std::size_t i = 0; i < g.size(); ++i) nb->grad[i] += sb * g[i];
                }
                break;
            }
            case OpKind::Mul: {
                const bool sa = na->values.size() == 1;
                const bool sb2 = nb->values.size() == 1;
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double av = na->values[sa ? 0 : i];
                    const double bv = nb->values[sb2 ? 0 : i];
                    if (wa) na->grad[sa ? 0 : i] += g[i] * bv;
                    if (wb) nb->grad[sb2 ? 0 : i] += g[i] * av;
                }
                break;
            }
            case OpKind::AddScalar:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] += g[i];
                break;
            case OpKind::Scale:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] += n.scalar * g[i];
                break;
            case OpKind::Negate:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] -= g[i];
                break;
            case OpKind::Square:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        na->grad[i] += 2.0 * na->values[i] * g[i];
                break;
            case OpKind::Tanh:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        na->grad[i] += (1.0 - n.values[i] * n.values[i]) * g[i];
                break;
            case OpKind::Silu:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        const double s = sigmoid(na->values[i]);
                        na->grad[i] += s * (1.0 + na->values[i] * (1.0 - s)) * g[i];
                    }
                break;
            case OpKind::Relu:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (na->values[i] > 0.0) na->grad[i] += g[i];
                break;
            case OpKind::MatMul: {
                const int m = na->shape[0], k = na->shape[1], out = nb->shape[1];
                if (wa) gemm_acc_nt(na->grad.data(), g.data(), nb->values.data(), m, out, k);
                if (wb) gemm_acc_tn(nb->grad.data(), na->values.data(), g.data(), m, k, out);
                break;
            }
            case OpKind::Linear: {
                const int rows = n.shape[0], out = n.shape[1];
                const int in = nb->shape[0];
                if (wa) gemm_acc_nt(na->grad.data(), g.data(), nb->values.data(), rows, out, in);
                if (wb) gemm_acc_tn(nb->grad.data(), na->values.data(), g.data(), rows, in, out);
                if (wc)
                    for (int r = 0; r < rows; ++r)
                        for (int j = 0; j < out; ++j)
                            nc->grad[j] += g[static_cast<std::size_t>(r) * out + j];
                break;
            }
            case OpKind::Transpose: {
                if (wa) {
                    const int m = na->shape[0], k = na->shape[1];
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < k; ++j)
                            na->grad[static_cast<std::size_t>(i) * k + j] +=
                                g[static_cast<std::size_t>(j) * m + i];
                }
                break;
            }
            case OpKind::RowAffine: {
                if (wa) {
                    const int cols = static_cast<int>(n.row_scale.size());
                    const int rows = static_cast<int>(n.values.size()) / cols;
                    for (int r = 0; r < rows; ++r)
                        for (int c2 = 0; c2 < cols; ++c2) {
                            const std::size_t i = static_cast<std::size_t>(r) * cols + c2;
                            na->grad[i] += g[i] * n.row_scale[c2];
                        }
                }
                break;
            }
            case OpKind::SumAll:
                if (wa)
                    for (std::size_t i = 0; i < na->grad.size(); ++i) na->grad[i] += g[0];
                break;
            case OpKind::SumAxis0: {
                if (wa) {
                    const int m = na->shape[0], k = na->shape[1];
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < k; ++j)
                            na->grad[static_cast<std::size_t>(i) * k + j] += g[j];
                }
                break;
            }
            case OpKind::SumAxis1: {
                if (wa) {
                    const int m = na->shape[0], k = na->shape[1];
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < k; ++j)
                            na->grad[static_cast<std::size_t>(i) * k + j] += g[i];
                }
                break;
            }
            case OpKind::ConcatCols: {
                if (n.shape.size() == 1) {
                    const int ca = na->shape[0];
                    if (wa)
                        for (int i = 0; i < ca; ++i) na->grad[i] += g[i];
                    if (wb)
                        for (std::size_t i = ca; i < g.size(); ++i) nb->grad[i - ca] += g[i];
                } else {
                    const int rows = n.shape[0], ca = na->shape[1], cb = nb->shape[1];
                    for (int r = 0; r < rows; ++r) {
                        const double* gr = g.data() + static_cast<std::size_t>(r) * (ca + cb);
                        if (wa) {
                            double* da = na->grad.data() + static_cast<std::size_t>(r) * ca;
                            for (int i = 0; i < ca; ++i) da[i] += gr[i];
                        }
                        if (wb) {
                            double* db = nb->grad.data() + static_cast<std::size_t>(r) * cb;
                            for (int i = 0; i < cb; ++i) db[i] += gr[ca + i];
                        }
                    }
                }
                break;
            }
            case OpKind::Reshape:
                if (wa)
                    for (std::size_t i = 0; i < g.size(); ++i) na->grad[i] += g[i];
                break;
            case OpKind::Leaf:
                break;
        }
    }
}

}  // namespace pdedpc::ad
