#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "c3gnn/matrix.hpp"

namespace c3gnn {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; the tape owns the
// storage and the handle stays valid for the tape's lifetime.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
};

// Define-by-run computation tape for dense-matrix reverse-mode AD. Nodes are
// appended in evaluation order, which is by construction a topological order,
// so backward() is a single reverse sweep. A tape and its tensors belong to
// one logical execution context; the whole graph is freed with the tape.
class Tape {
public:
    Var leaf(Matrix value, bool requires_grad) {
        check_finite(value, "leaf");
        return push(std::move(value), requires_grad, {});
    }

    Var constant(Matrix value) { return leaf(std::move(value), false); }

    const Matrix& value(Var v) const { return node(v).value; }

    const Matrix& grad(Var v) const {
        const Node& n = node(v);
        if (!n.requires_grad)
            throw std::invalid_argument("grad: tensor does not require grad");
        if (!n.grad_valid)
            throw std::invalid_argument("grad: backward has not been run");
        return n.grad;
    }

    bool requires_grad(Var v) const { return node(v).requires_grad; }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse, accumulating
    // gradients additively across fan-out into every requires_grad node.
    void backward(Var loss) {
        Node& ln = node(loss);
        if (ln.value.rows() != 1 || ln.value.cols() != 1)
            throw std::invalid_argument("backward: loss must be a 1x1 scalar");
        if (!ln.requires_grad)
            throw std::invalid_argument("backward: loss is detached from all parameters");
        for (Node& n : nodes_) {
            if (n.requires_grad) {
                n.grad = Matrix::zeros(n.value.rows(), n.value.cols());
                n.grad_valid = true;
            }
        }
        ln.grad.at(0, 0) = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.requires_grad && n.back) n.back(*this, i);
        }
    }

    size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        bool grad_valid = false;
        // backward rule; receives the tape and this node's index
        std::function<void(Tape&, int)> back;
    };

    // deque: references returned by value()/grad() stay valid as nodes are appended
    std::deque<Node> nodes_;

    Node& node(Var v) {
        if (!v.valid() || v.tape != this || v.id >= static_cast<int>(nodes_.size()))
            throw std::invalid_argument("Tape: invalid tensor handle");
        return nodes_[v.id];
    }
    const Node& node(Var v) const {
        if (!v.valid() || v.tape != this || v.id >= static_cast<int>(nodes_.size()))
            throw std::invalid_argument("Tape: invalid tensor handle");
        return nodes_[v.id];
    }

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> back) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

    static void check_finite(const Matrix& m, const char* op) {
        if (!m.all_finite())
            throw std::invalid_argument(std::string(op) + ": non-finite values");
    }

    Matrix& grad_ref(int id) { return nodes_[id].grad; }
    const Matrix& value_ref(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].requires_grad; }

    friend Var matmul(Var, Var);
    friend Var matmul_nt(Var, Var);
    friend Var add(Var, Var);
    friend Var scale(Var, double);
    friend Var hadamard_const(Var, const Matrix&);
    friend Var relu(Var);
    friend Var mean_rows(Var);
    friend Var concat_rows(Var, Var);
    friend Var row_l2_normalize(Var);
    friend Var masked_log_sum_exp_rows(Var, const Matrix&);
    friend Var row_sum(Var);
    friend Var sum(Var);
};

namespace detail {
inline Tape* same_tape(Var a, Var b) {
    if (!a.valid() || !b.valid() || a.tape != b.tape)
        throw std::invalid_argument("op: tensors must live on the same tape");
    return a.tape;
}
} // namespace detail

inline Var matmul(Var a, Var b) {
    Tape* t = detail::same_tape(a, b);
    Matrix c = matmul_values(t->value(a), t->value(b));
    Tape::check_finite(c, "matmul");
    const bool rg = t->requires_grad(a) || t->requires_grad(b);
    return t->push(std::move(c), rg, [a, b](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(a.id)) {
            Matrix ga = matmul_nt_values(g, tp.value_ref(b.id));
            Matrix& acc = tp.grad_ref(a.id);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += ga[i];
        }
        if (tp.needs_grad(b.id)) {
            Matrix gb = matmul_tn_values(tp.value_ref(a.id), g);
            Matrix& acc = tp.grad_ref(b.id);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += gb[i];
        }
    });
}

// C = A * B^T
inline Var matmul_nt(Var a, Var b) {
    Tape* t = detail::same_tape(a, b);
    Matrix c = matmul_nt_values(t->value(a), t->value(b));
    Tape::check_finite(c, "matmul_nt");
    const bool rg = t->requires_grad(a) || t->requires_grad(b);
    return t->push(std::move(c), rg, [a, b](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(a.id)) {
            Matrix ga = matmul_values(g, tp.value_ref(b.id));
            Matrix& acc = tp.grad_ref(a.id);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += ga[i];
        }
        if (tp.needs_grad(b.id)) {
            Matrix gb = matmul_tn_values(g, tp.value_ref(a.id));
            Matrix& acc = tp.grad_ref(b.id);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += gb[i];
        }
    });
}

// Elementwise sum; b may also be a 1xN bias broadcast over a's rows.
inline Var add(Var a, Var b) {
    Tape* t = detail::same_tape(a, b);
    const Matrix& av = t->value(a);
    const Matrix& bv = t->value(b);
    const bool broadcast = bv.rows() == 1 && av.rows() != 1 && bv.cols() == av.cols();
    if (!broadcast && !av.same_shape(bv))
        throw std::invalid_argument("add: shape mismatch");
    Matrix c = av;
    for (int i = 0; i < c.rows(); ++i)
        for (int j = 0; j < c.cols(); ++j) c.at(i, j) += bv.at(broadcast ? 0 : i, j);
    Tape::check_finite(c, "add");
    const bool rg = t->requires_grad(a) || t->requires_grad(b);
    return t->push(std::move(c), rg, [a, b, broadcast](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(a.id)) {
            Matrix& acc = tp.grad_ref(a.id);
            for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
        }
        if (tp.needs_grad(b.id)) {
            Matrix& acc = tp.grad_ref(b.id);
            if (broadcast) {
                for (int i = 0; i < g.rows(); ++i)
                    for (int j = 0; j < g.cols(); ++j) acc.at(0, j) += g.at(i, j);
            } else {
                for (size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
            }
        }
    });
}

inline Var scale(Var a, double c) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("scale: invalid tensor");
    Matrix v = t->value(a);
    for (size_t i = 0; i < v.size(); ++i) v[i] *= c;
    Tape::check_finite(v, "scale");
    return t->push(std::move(v), t->requires_grad(a), [a, c](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        Matrix& acc = tp.grad_ref(a.id);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += c * g[i];
    });
}

// Elementwise product with a fixed (non-differentiated) matrix.
inline Var hadamard_const(Var a, const Matrix& m) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("hadamard_const: invalid tensor");
    if (!t->value(a).same_shape(m))
        throw std::invalid_argument("hadamard_const: shape mismatch");
    Matrix v = t->value(a);
    for (size_t i = 0; i < v.size(); ++i) v[i] *= m[i];
    Tape::check_finite(v, "hadamard_const");
    return t->push(std::move(v), t->requires_grad(a), [a, m](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        Matrix& acc = tp.grad_ref(a.id);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += m[i] * g[i];
    });
}

// Subgradient at 0 is 0.
inline Var relu(Var a) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("relu: invalid tensor");
    Matrix v = t->value(a);
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i] < 0.0) v[i] = 0.0;
    return t->push(std::move(v), t->requires_grad(a), [a](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        const Matrix& x = tp.value_ref(a.id);
        Matrix& acc = tp.grad_ref(a.id);
        for (size_t i = 0; i < acc.size(); ++i)
            if (x[i] > 0.0) acc[i] += g[i];
    });
}

// Column-wise mean: (m x n) -> (1 x n).
inline Var mean_rows(Var a) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("mean_rows: invalid tensor");
    const Matrix& av = t->value(a);
    if (av.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
    const int m = av.rows();
    Matrix v(1, av.cols());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < av.cols(); ++j) v.at(0, j) += av.at(i, j) / m;
    Tape::check_finite(v, "mean_rows");
    return t->push(std::move(v), t->requires_grad(a), [a, m](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        Matrix& acc = tp.grad_ref(a.id);
        for (int i = 0; i < acc.rows(); ++i)
            for (int j = 0; j < acc.cols(); ++j) acc.at(i, j) += g.at(0, j) / m;
    });
}

// Vertical stack: (m1 x n) over (m2 x n) -> ((m1+m2) x n).
inline Var concat_rows(Var a, Var b) {
    Tape* t = detail::same_tape(a, b);
    const Matrix& av = t->value(a);
    const Matrix& bv = t->value(b);
    if (av.cols() != bv.cols())
        throw std::invalid_argument("concat_rows: column mismatch");
    Matrix v(av.rows() + bv.rows(), av.cols());
    for (int i = 0; i < av.rows(); ++i)
        for (int j = 0; j < av.cols(); ++j) v.at(i, j) = av.at(i, j);
    for (int i = 0; i < bv.rows(); ++i)
        for (int j = 0; j < bv.cols(); ++j) v.at(av.rows() + i, j) = bv.at(i, j);
    const int split = av.rows();
    const bool rg = t->requires_grad(a) || t->requires_grad(b);
    return t->push(std::move(v), rg, [a, b, split](Tape& tp, int self) {
        const Matrix& g = tp.grad_ref(self);
        if (tp.needs_grad(a.id)) {
            Matrix& acc = tp.grad_ref(a.id);
            for (int i = 0; i < acc.rows(); ++i)
                for (int j = 0; j < acc.cols(); ++j) acc.at(i, j) += g.at(i, j);
        }
        if (tp.needs_grad(b.id)) {
            Matrix& acc = tp.grad_ref(b.id);
            for (int i = 0; i < acc.rows(); ++i)
                for (int j = 0; j < acc.cols(); ++j) acc.at(i, j) += g.at(split + i, j);
        }
    });
}

inline constexpr double kNormalizeEps = 1e-12;

// Each row divided by its Euclidean norm. Rows with norm < 1e-12 are
// rejected rather than perturbed.
inline Var row_l2_normalize(Var a) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("row_l2_normalize: invalid tensor");
    const Matrix& av = t->value(a);
    std::vector<double> norms(av.rows());
    Matrix v(av.rows(), av.cols());
    for (int i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < av.cols(); ++j) s += av.at(i, j) * av.at(i, j);
        const double n = std::sqrt(s);
        if (n < kNormalizeEps)
            throw std::invalid_argument("row_l2_normalize: zero row");
        norms[i] = n;
        for (int j = 0; j < av.cols(); ++j) v.at(i, j) = av.at(i, j) / n;
    }
    return t->push(std::move(v), t->requires_grad(a), [a, norms](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        const Matrix& y = tp.value_ref(self); // normalized rows
        Matrix& acc = tp.grad_ref(a.id);
        for (int i = 0; i < acc.rows(); ++i) {
            double dot = 0.0;
            for (int j = 0; j < acc.cols(); ++j) dot += y.at(i, j) * g.at(i, j);
            for (int j = 0; j < acc.cols(); ++j)
                acc.at(i, j) += (g.at(i, j) - y.at(i, j) * dot) / norms[i];
        }
    });
}

// Per row i: log sum over {j : mask(i,j)=1} of exp(a(i,j)), with
// max-subtraction stabilization. Result is (m x 1). mask entries must be
// 0 or 1 and every row needs at least one active entry.
inline Var masked_log_sum_exp_rows(Var a, const Matrix& mask) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("log_sum_exp: invalid tensor");
    const Matrix& av = t->value(a);
    if (!av.same_shape(mask))
        throw std::invalid_argument("log_sum_exp: mask shape mismatch");
    if (av.cols() == 0) throw std::invalid_argument("log_sum_exp: empty rows");
    Matrix v(av.rows(), 1);
    for (int i = 0; i < av.rows(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < av.cols(); ++j)
            if (mask.at(i, j) != 0.0 && av.at(i, j) > mx) mx = av.at(i, j);
        if (!std::isfinite(mx))
            throw std::invalid_argument("log_sum_exp: row with no active entries");
        double s = 0.0;
        for (int j = 0; j < av.cols(); ++j)
            if (mask.at(i, j) != 0.0) s += std::exp(av.at(i, j) - mx);
        v.at(i, 0) = mx + std::log(s);
    }
    return t->push(std::move(v), t->requires_grad(a), [a, mask](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        const Matrix& x = tp.value_ref(a.id);
        const Matrix& lse = tp.value_ref(self);
        Matrix& acc = tp.grad_ref(a.id);
        for (int i = 0; i < acc.rows(); ++i) {
            const double gi = g.at(i, 0);
            if (gi == 0.0) continue;
            for (int j = 0; j < acc.cols(); ++j)
                if (mask.at(i, j) != 0.0)
                    acc.at(i, j) += gi * std::exp(x.at(i, j) - lse.at(i, 0));
        }
    });
}

inline Var log_sum_exp_rows(Var a) {
    if (!a.valid()) throw std::invalid_argument("log_sum_exp: invalid tensor");
    const Matrix& av = a.tape->value(a);
    return masked_log_sum_exp_rows(a, Matrix(av.rows(), av.cols(), 1.0));
}

// (m x n) -> (m x 1) row sums.
inline Var row_sum(Var a) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("row_sum: invalid tensor");
    const Matrix& av = t->value(a);
    Matrix v(av.rows(), 1);
    for (int i = 0; i < av.rows(); ++i)
        for (int j = 0; j < av.cols(); ++j) v.at(i, 0) += av.at(i, j);
    Tape::check_finite(v, "row_sum");
    return t->push(std::move(v), t->requires_grad(a), [a](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const Matrix& g = tp.grad_ref(self);
        Matrix& acc = tp.grad_ref(a.id);
        for (int i = 0; i < acc.rows(); ++i)
            for (int j = 0; j < acc.cols(); ++j) acc.at(i, j) += g.at(i, 0);
    });
}

// Full reduction to a 1x1 scalar.
inline Var sum(Var a) {
    Tape* t = a.tape;
    if (!a.valid()) throw std::invalid_argument("sum: invalid tensor");
    const Matrix& av = t->value(a);
    double s = 0.0;
    for (size_t i = 0; i < av.size(); ++i) s += av[i];
    if (!std::isfinite(s)) throw std::invalid_argument("sum: non-finite result");
    return t->push(Matrix::scalar(s), t->requires_grad(a), [a](Tape& tp, int self) {
        if (!tp.needs_grad(a.id)) return;
        const double g = tp.grad_ref(self).at(0, 0);
        Matrix& acc = tp.grad_ref(a.id);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += g;
    });
}

} // namespace c3gnn
