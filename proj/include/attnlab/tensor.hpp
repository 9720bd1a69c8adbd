#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace attnlab {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    return os.str();
}

// Dense row-major tensor of doubles with an optional gradient buffer.
// Value-semantics handle: copies share storage, which is what lets grouped
// attention variants alias one weight matrix across heads.
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, bool requires_grad = false) {
        long n = 1;
        for (int d : shape) {
            if (d <= 0) throw std::invalid_argument("Tensor: dimension sizes must be positive, got " + shape_str(shape));
            n *= d;
        }
        s_ = std::make_shared<Storage>();
        s_->shape = std::move(shape);
        s_->nelem = n;
        s_->data.assign(static_cast<size_t>(n), 0.0);
        if (requires_grad) {
            s_->requires_grad = true;
            s_->grad.assign(static_cast<size_t>(n), 0.0);
        }
    }

    Tensor(int rows, int cols, bool requires_grad = false) : Tensor(std::vector<int>{rows, cols}, requires_grad) {}

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

    static Tensor full(int rows, int cols, double v) {
        Tensor t(rows, cols);
        for (double& x : t.data()) x = v;
        return t;
    }

    static Tensor identity(int n) {
        Tensor t(n, n);
        for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data()[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> v) {
        Tensor t(1, static_cast<int>(v.size()));
        t.data() = std::move(v);
        return t;
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false) {
        int r = static_cast<int>(rows.size());
        int c = static_cast<int>(rows.begin()->size());
        Tensor t(r, c, requires_grad);
        int i = 0;
        for (const auto& rr : rows) {
            if (static_cast<int>(rr.size()) != c) throw std::invalid_argument("Tensor::from_rows: ragged rows");
            int j = 0;
            for (double v : rr) t.at(i, j++) = v;
            ++i;
        }
        return t;
    }

    bool defined() const { return static_cast<bool>(s_); }

    const std::vector<int>& shape() const { require(); return s_->shape; }
    int ndim() const { require(); return static_cast<int>(s_->shape.size()); }
    long size() const { require(); return s_->nelem; }
    bool is_scalar() const { return defined() && s_->nelem == 1; }

    int rows() const { require2d(); return s_->shape[0]; }
    int cols() const { require2d(); return s_->shape[1]; }

    std::vector<double>& data() { require(); return s_->data; }
    const std::vector<double>& data() const { require(); return s_->data; }

    bool requires_grad() const { return defined() && s_->requires_grad; }

    std::vector<double>& grad() {
        require();
        if (!s_->requires_grad) throw std::logic_error("Tensor::grad: tensor does not carry a gradient");
        return s_->grad;
    }
    const std::vector<double>& grad() const {
        require();
        if (!s_->requires_grad) throw std::logic_error("Tensor::grad: tensor does not carry a gradient");
        return s_->grad;
    }

    void set_requires_grad(bool on) {
        require();
        s_->requires_grad = on;
        if (on)
            s_->grad.assign(static_cast<size_t>(s_->nelem), 0.0);
        else
            s_->grad.clear();
    }

    void zero_grad() {
        require();
        if (s_->requires_grad) s_->grad.assign(static_cast<size_t>(s_->nelem), 0.0);
    }

    double& at(int r, int c) { require2d(); return s_->data[static_cast<size_t>(r) * s_->shape[1] + c]; }
    double at(int r, int c) const { require2d(); return s_->data[static_cast<size_t>(r) * s_->shape[1] + c]; }

    double value() const {
        require();
        if (s_->nelem != 1) throw std::invalid_argument("Tensor::value: tensor of shape " + shape_str(s_->shape) + " is not scalar");
        return s_->data[0];
    }

    ConstMatMap mat() const { require2d(); return ConstMatMap(s_->data.data(), s_->shape[0], s_->shape[1]); }
    MatMap mat() { require2d(); return MatMap(s_->data.data(), s_->shape[0], s_->shape[1]); }
    ConstMatMap grad_mat() const { require2d(); return ConstMatMap(grad().data(), s_->shape[0], s_->shape[1]); }
    MatMap grad_mat() { require2d(); return MatMap(grad().data(), s_->shape[0], s_->shape[1]); }

    // Storage identity; used to deduplicate shared weight matrices.
    const void* id() const { return s_.get(); }
    bool same_storage(const Tensor& o) const { return s_ == o.s_; }

    // Deep copy of values into fresh storage (gradient state not copied).
    Tensor clone() const {
        require();
        Tensor t(s_->shape, s_->requires_grad);
        t.s_->data = s_->data;
        return t;
    }

  private:
    struct Storage {
        std::vector<int> shape;
        long nelem = 0;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };

    std::shared_ptr<Storage> s_;

    void require() const {
        if (!s_) throw std::logic_error("Tensor: operation on an undefined tensor");
    }
    void require2d() const {
        require();
        if (s_->shape.size() != 2) throw std::invalid_argument("Tensor: expected 2-d tensor, got shape " + shape_str(s_->shape));
    }
};

// Boolean visibility mask for softmax rows; true = position may attend.
struct Mask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> allow;

    static Mask causal(int t) {
        Mask m;
        m.rows = t;
        m.cols = t;
        m.allow.assign(static_cast<size_t>(t) * t, 0);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j <= i; ++j) m.allow[static_cast<size_t>(i) * t + j] = 1;
        return m;
    }

    bool at(int r, int c) const { return allow[static_cast<size_t>(r) * cols + c] != 0; }
};

// Reverse-mode tape. Ops compute the forward value immediately and, when any
// input carries a gradient, record a backward closure. backward() replays the
// closures in reverse recording order and then discards the tape.
class Graph {
  public:
    Tensor matmul(const Tensor& a, const Tensor& b) {
        check2d("matmul", a);
        check2d("matmul", b);
        if (a.cols() != b.rows())
            throw std::invalid_argument("matmul: inner dimensions disagree (" + shape_str(a.shape()) + " vs " + shape_str(b.shape()) + ")");
        Tensor out = make_output(a.rows(), b.cols(), a.requires_grad() || b.requires_grad());
        out.mat().noalias() = a.mat() * b.mat();
        if (out.requires_grad()) {
            record([a = a, b = b, out]() mutable {
                if (a.requires_grad()) a.grad_mat().noalias() += out.grad_mat() * b.mat().transpose();
                if (b.requires_grad()) b.grad_mat().noalias() += a.mat().transpose() * out.grad_mat();
            });
        }
        return out;
    }

    Tensor transpose(const Tensor& a) {
        check2d("transpose", a);
        Tensor out = make_output(a.cols(), a.rows(), a.requires_grad());
        out.mat() = a.mat().transpose();
        if (out.requires_grad()) {
            record([a = a, out]() mutable {
                if (a.requires_grad()) a.grad_mat() += out.grad_mat().transpose();
            });
        }
        return out;
    }

    // Element-wise sum; also accepts a 1xN row vector for b, broadcast over
    // the rows of a.
    Tensor add(const Tensor& a, const Tensor& b) {
        check2d("add", a);
        check2d("add", b);
        const bool broadcast = (b.rows() == 1 && a.cols() == b.cols() && a.rows() != 1);
        if (!broadcast && (a.rows() != b.rows() || a.cols() != b.cols()))
            throw std::invalid_argument("add: shape mismatch (" + shape_str(a.shape()) + " vs " + shape_str(b.shape()) + ")");
        Tensor out = make_output(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
        if (broadcast)
            out.mat() = a.mat().rowwise() + b.mat().row(0);
        else
            out.mat() = a.mat() + b.mat();
        if (out.requires_grad()) {
            record([a = a, b = b, out, broadcast]() mutable {
                if (a.requires_grad()) a.grad_mat() += out.grad_mat();
                if (b.requires_grad()) {
                    if (broadcast)
                        b.grad_mat().row(0) += out.grad_mat().colwise().sum();
                    else
                        b.grad_mat() += out.grad_mat();
                }
            });
        }
        return out;
    }

    Tensor scale(const Tensor& a, double s) {
        check2d("scale", a);
        Tensor out = make_output(a.rows(), a.cols(), a.requires_grad());
        out.mat() = a.mat() * s;
        if (out.requires_grad()) {
            record([a = a, out, s]() mutable {
                if (a.requires_grad()) a.grad_mat() += out.grad_mat() * s;
            });
        }
        return out;
    }

    Tensor mul(const Tensor& a, const Tensor& b) {
        check2d("mul", a);
        check2d("mul", b);
        if (a.rows() != b.rows() || a.cols() != b.cols())
            throw std::invalid_argument("mul: shape mismatch (" + shape_str(a.shape()) + " vs " + shape_str(b.shape()) + ")");
        Tensor out = make_output(a.rows(), a.cols(), a.requires_grad() || b.requires_grad());
        out.mat() = a.mat().cwiseProduct(b.mat());
        if (out.requires_grad()) {
            record([a = a, b = b, out]() mutable {
                if (a.requires_grad()) a.grad_mat() += out.grad_mat().cwiseProduct(b.mat());
                if (b.requires_grad()) b.grad_mat() += out.grad_mat().cwiseProduct(a.mat());
            });
        }
        return out;
    }

    Tensor concat_last_dim(const Tensor& a, const Tensor& b) {
        check2d("concat_last_dim", a);
        check2d("concat_last_dim", b);
        if (a.rows() != b.rows())
            throw std::invalid_argument("concat_last_dim: row counts disagree (" + shape_str(a.shape()) + " vs " + shape_str(b.shape()) + ")");
        const int p = a.cols(), q = b.cols();
        Tensor out = make_output(a.rows(), p + q, a.requires_grad() || b.requires_grad());
        out.mat().leftCols(p) = a.mat();
        out.mat().rightCols(q) = b.mat();
        if (out.requires_grad()) {
            record([a = a, b = b, out, p, q]() mutable {
                if (a.requires_grad()) a.grad_mat() += out.grad_mat().leftCols(p);
                if (b.requires_grad()) b.grad_mat() += out.grad_mat().rightCols(q);
            });
        }
        return out;
    }

    Tensor softmax_rows(const Tensor& x) { return softmax_rows(x, nullptr); }

    // Row-wise softmax over the visible entries; masked entries are exactly
    // zero in the output and excluded from the max/sum stabilization.
    Tensor softmax_rows(const Tensor& x, const Mask* mask) {
        check2d("softmax_rows", x);
        const int m = x.rows(), n = x.cols();
        if (mask && (mask->rows != m || mask->cols != n))
            throw std::invalid_argument("softmax_rows: mask shape " + std::to_string(mask->rows) + "x" + std::to_string(mask->cols) +
                                        " does not match input " + shape_str(x.shape()));
        Tensor out = make_output(m, n, x.requires_grad());
        for (int i = 0; i < m; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j)
                if (!mask || mask->at(i, j)) mx = std::max(mx, x.at(i, j));
            if (!std::isfinite(mx) && mx < 0)
                throw std::invalid_argument("softmax_rows: row " + std::to_string(i) + " is fully masked");
            double denom = 0.0;
            for (int j = 0; j < n; ++j) {
                if (!mask || mask->at(i, j)) {
                    const double e = std::exp(x.at(i, j) - mx);
                    out.at(i, j) = e;
                    denom += e;
                }
            }
            for (int j = 0; j < n; ++j)
                if (!mask || mask->at(i, j)) out.at(i, j) /= denom;
        }
        if (out.requires_grad()) {
            record([x = x, out]() mutable {
                if (!x.requires_grad()) return;
                const int m = x.rows(), n = x.cols();
                for (int i = 0; i < m; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < n; ++j) dot += out.grad_mat()(i, j) * out.mat()(i, j);
                    for (int j = 0; j < n; ++j)
                        x.grad_mat()(i, j) += out.mat()(i, j) * (out.grad_mat()(i, j) - dot);
                }
            });
        }
        return out;
    }

    Tensor relu(const Tensor& x) {
        check2d("relu", x);
        Tensor out = make_output(x.rows(), x.cols(), x.requires_grad());
        out.mat() = x.mat().cwiseMax(0.0);
        if (out.requires_grad()) {
            record([x = x, out]() mutable {
                if (!x.requires_grad()) return;
                x.grad_mat() += out.grad_mat().cwiseProduct((x.mat().array() > 0.0).cast<double>().matrix());
            });
        }
        return out;
    }

    Tensor sum(const Tensor& x) {
        check2d("sum", x);
        Tensor out = make_output(1, 1, x.requires_grad());
        out.data()[0] = x.mat().sum();
        if (out.requires_grad()) {
            record([x = x, out]() mutable {
                if (!x.requires_grad()) return;
                x.grad_mat().array() += out.grad()[0];
            });
        }
        return out;
    }

    // Per-row layer normalization with learnable 1xN gain/shift.
    Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
        check2d("layer_norm_rows", x);
        const int m = x.rows(), n = x.cols();
        if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
            throw std::invalid_argument("layer_norm_rows: gamma/beta must be 1x" + std::to_string(n));
        Tensor out = make_output(m, n, x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
        auto xhat = std::make_shared<RowMat>(m, n);
        auto inv_std = std::make_shared<std::vector<double>>(m);
        for (int i = 0; i < m; ++i) {
            const double mu = x.mat().row(i).mean();
            double var = 0.0;
            for (int j = 0; j < n; ++j) {
                const double d = x.at(i, j) - mu;
                var += d * d;
            }
            var /= n;
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[i] = is;
            for (int j = 0; j < n; ++j) {
                (*xhat)(i, j) = (x.at(i, j) - mu) * is;
                out.at(i, j) = gamma.at(0, j) * (*xhat)(i, j) + beta.at(0, j);
            }
        }
        if (out.requires_grad()) {
            record([x = x, gamma = gamma, beta = beta, out, xhat, inv_std]() mutable {
                const int m = x.rows(), n = x.cols();
                for (int i = 0; i < m; ++i) {
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double gy = out.grad_mat()(i, j);
                        const double gj = gamma.at(0, j) * gy;
                        mean_g += gj;
                        mean_gx += gj * (*xhat)(i, j);
                        if (gamma.requires_grad()) gamma.grad_mat()(0, j) += gy * (*xhat)(i, j);
                        if (beta.requires_grad()) beta.grad_mat()(0, j) += gy;
                    }
                    mean_g /= n;
                    mean_gx /= n;
                    if (x.requires_grad()) {
                        for (int j = 0; j < n; ++j) {
                            const double gj = gamma.at(0, j) * out.grad_mat()(i, j);
                            x.grad_mat()(i, j) += (gj - mean_g - (*xhat)(i, j) * mean_gx) * (*inv_std)[i];
                        }
                    }
                }
            });
        }
        return out;
    }

    // Gathers table rows by index (embedding lookup).
    Tensor take_rows(const Tensor& table, std::vector<int> ids) {
        check2d("take_rows", table);
        for (int id : ids)
            if (id < 0 || id >= table.rows())
                throw std::invalid_argument("take_rows: index " + std::to_string(id) + " out of range [0, " + std::to_string(table.rows()) + ")");
        Tensor out = make_output(static_cast<int>(ids.size()), table.cols(), table.requires_grad());
        for (size_t i = 0; i < ids.size(); ++i) out.mat().row(static_cast<int>(i)) = table.mat().row(ids[i]);
        if (out.requires_grad()) {
            record([table = table, out, ids = std::move(ids)]() mutable {
                if (!table.requires_grad()) return;
                for (size_t i = 0; i < ids.size(); ++i)
                    table.grad_mat().row(ids[i]) += out.grad_mat().row(static_cast<int>(i));
            });
        }
        return out;
    }

    // Mean token-level cross entropy over the rows with counted[i] != 0.
    Tensor cross_entropy_rows(const Tensor& logits, std::vector<int> targets, std::vector<uint8_t> counted) {
        check2d("cross_entropy_rows", logits);
        const int m = logits.rows(), v = logits.cols();
        if (static_cast<int>(targets.size()) != m || static_cast<int>(counted.size()) != m)
            throw std::invalid_argument("cross_entropy_rows: targets/counted length must equal row count");
        long n_counted = 0;
        for (int i = 0; i < m; ++i)
            if (counted[i]) {
                if (targets[i] < 0 || targets[i] >= v)
                    throw std::invalid_argument("cross_entropy_rows: target " + std::to_string(targets[i]) + " out of range");
                ++n_counted;
            }
        if (n_counted == 0) throw std::invalid_argument("cross_entropy_rows: no counted rows");
        Tensor out = make_output(1, 1, logits.requires_grad());
        double loss = 0.0;
        for (int i = 0; i < m; ++i) {
            if (!counted[i]) continue;
            const double mx = logits.mat().row(i).maxCoeff();
            double denom = 0.0;
            for (int j = 0; j < v; ++j) denom += std::exp(logits.at(i, j) - mx);
            loss += mx + std::log(denom) - logits.at(i, targets[i]);
        }
        out.data()[0] = loss / static_cast<double>(n_counted);
        if (out.requires_grad()) {
            record([logits = logits, out, targets = std::move(targets), counted = std::move(counted), n_counted]() mutable {
                if (!logits.requires_grad()) return;
                const int m = logits.rows(), v = logits.cols();
                const double g = out.grad()[0] / static_cast<double>(n_counted);
                for (int i = 0; i < m; ++i) {
                    if (!counted[i]) continue;
                    const double mx = logits.mat().row(i).maxCoeff();
                    double denom = 0.0;
                    for (int j = 0; j < v; ++j) denom += std::exp(logits.at(i, j) - mx);
                    for (int j = 0; j < v; ++j) {
                        const double p = std::exp(logits.at(i, j) - mx) / denom;
                        logits.grad_mat()(i, j) += g * (p - (j == targets[i] ? 1.0 : 0.0));
                    }
                }
            });
        }
        return out;
    }

    // Seeds the scalar loss gradient with 1 and replays recorded ops in
    // reverse. The tape is discarded afterwards; gradients stay in place
    // until zero_grad.
    void backward(const Tensor& loss) {
        if (!loss.defined() || loss.size() != 1)
            throw std::invalid_argument("backward: loss must be a scalar tensor" +
                                        (loss.defined() ? " (got shape " + shape_str(loss.shape()) + ")" : std::string()));
        if (loss.requires_grad()) {
            Tensor seed = loss;
            seed.grad()[0] += 1.0;
            for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        }
        nodes_.clear();
    }

    size_t node_count() const { return nodes_.size(); }

  private:
    std::vector<std::function<void()>> nodes_;

    static void check2d(const char* op, const Tensor& t) {
        if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor operand");
        if (t.ndim() != 2) throw std::invalid_argument(std::string(op) + ": expected 2-d tensor, got " + shape_str(t.shape()));
    }

    static Tensor make_output(int rows, int cols, bool needs_grad) { return Tensor(rows, cols, needs_grad); }

    void record(std::function<void()> f) { nodes_.push_back(std::move(f)); }
};

} // namespace attnlab
