#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdedpc::ad {

// Dense row-major tensors of rank 0, 1 or 2. Rank 2 is written [rows, cols].
using Shape = std::vector<int>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class OpKind : unsigned char {
    Leaf,
    Add,
    Sub,
    Mul,
    AddScalar,
    Scale,
    Negate,
    Square,
    Tanh,
    Silu,
    Relu,
    MatMul,
    Linear,
    Transpose,
    RowAffine,
    SumAll,
    SumAxis0,
    SumAxis1,
    ConcatCols,
    Reshape,
};

struct Node {
    OpKind op = OpKind::Leaf;
    int a = -1;
    int b = -1;
    int c = -1;
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated on first write during backward
    bool requires_grad = false;
    double scalar = 0.0;                  // parameter of AddScalar / Scale
    std::vector<double> row_scale;        // RowAffine: per-column scale
    std::vector<double> row_shift;        // RowAffine: per-column shift
};

class Tape;

// Lightweight handle into a tape. Copying the handle does not copy data.
class Tensor {
public:
    Tensor() = default;
    Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape* tape() const { return tape_; }

    const Shape& shape() const;
    std::size_t numel() const;
    int rows() const;
    int cols() const;
    bool requires_grad() const;

    std::span<const double> values() const;
    std::span<double> values_mut();
    // Empty span when the tensor did not participate in any backward pass.
    std::span<const double> grad() const;

    double value() const;       // scalar tensors only
    double grad_value() const;  // scalar tensors only

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

// Define-by-run tape: rebuilt per forward pass, single-threaded. Node order
// is topological by construction, so backward is a single reverse sweep.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor leaf(const Shape& shape, std::span<const double> values, bool requires_grad);
    Tensor leaf(const Shape& shape, std::vector<double> values, bool requires_grad);
    Tensor zeros(const Shape& shape, bool requires_grad = false);
    Tensor scalar(double value, bool requires_grad = false);

    // Accumulates into leaf (and intermediate) grads; call zero_grad or use a
    // fresh tape between optimizer steps.
    void backward(const Tensor& loss);
    void zero_grad();

    std::size_t size() const { return nodes_.size(); }
    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

    Tensor emit(Node&& node);

private:
    std::vector<Node> nodes_;
};

// Elementwise ops. Binary ops require equal shapes or one scalar operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double constant);
Tensor scale(const Tensor& a, double factor);
Tensor negate(const Tensor& a);
Tensor square(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor relu(const Tensor& a);

// y[r,c] = x[r,c] * col_scale[c] + col_shift[c]; the vectors are constants,
// not tape tensors. Rank-1 x is treated as a single row.
Tensor row_affine(const Tensor& x, std::span<const double> col_scale,
                  std::span<const double> col_shift);

Tensor matmul(const Tensor& a, const Tensor& b);
// x:[B,in] (or [in]), w:[in,out], bias:[out] -> [B,out]; bias broadcasts over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor transpose(const Tensor& a);

Tensor sum_all(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_all(const Tensor& a);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, const Shape& shape);

// Enumeration hook for property tests that sweep every elementwise kind.
enum class ElemKind { Add, Sub, Mul, Square, Tanh, Silu, Relu, Scale, Negate };
Tensor apply_elementwise(ElemKind kind, const Tensor& a,
                         const std::optional<Tensor>& b = std::nullopt,
                         double constant = 0.0);

bool all_finite(std::span<const double> values);

}  // namespace pdedpc::ad
