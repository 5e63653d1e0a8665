#include "kunet/kernel.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace kunet {

namespace {

// Normal(0, 1/fan_in) weights keep activation scale level-independent;
// biases start at zero.
Matrix init_weight(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    return rng.normal_matrix(in_dim, out_dim, 0.0,
                             1.0 / std::sqrt(static_cast<double>(in_dim)));
}

}  // namespace

const char* to_string(KernelKind kind) {
    return kind == KernelKind::linear ? "linear" : "mlp";
}

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "mlp") return KernelKind::mlp;
    throw std::invalid_argument("unknown kernel kind '" + name + "' (expected linear|mlp)");
}

void Kernel::zero_grads() {
    for (ParamTensor& t : tensors_) t.grad.fill(0.0);
}

double Kernel::mean_abs_grad() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const ParamTensor& t : tensors_) {
        for (double g : t.grad.data) sum += std::fabs(g);
        n += t.grad.size();
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::size_t Kernel::param_count() const {
    std::size_t n = 0;
    for (const ParamTensor& t : tensors_) n += t.value.size();
    return n;
}

void Kernel::check_input(const Matrix& x) const {
    if (x.cols != spec_.in_dim) {
        std::ostringstream msg;
        msg << "kernel expects " << spec_.in_dim << " input columns, got " << x.shape_str();
        throw std::invalid_argument(msg.str());
    }
}

void Kernel::note_forward(const Matrix& x) {
    cached_input_ = x;
    has_cache_ = true;
    applications_ += x.rows;
}

void Kernel::note_backward(const Matrix& d_out) {
    if (!has_cache_)
        throw std::runtime_error("kernel backward called before forward (no cached input)");
    if (d_out.rows != cached_input_.rows || d_out.cols != spec_.out_dim) {
        std::ostringstream msg;
        msg << "kernel backward expects " << cached_input_.rows << "x" << spec_.out_dim
            << " output gradient, got " << d_out.shape_str();
        throw std::invalid_argument(msg.str());
    }
    cached_output_grad_ = d_out;
}

LinearKernel::LinearKernel(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : Kernel({KernelKind::linear, in_dim, out_dim, 0}) {
    tensors_.emplace_back("W", init_weight(in_dim, out_dim, rng));
    tensors_.emplace_back("b", Matrix(1, out_dim));
}

Matrix LinearKernel::forward(const Matrix& x) {
    check_input(x);
    note_forward(x);
    Matrix y = matmul(x, tensors_[0].value);
    const Matrix& b = tensors_[1].value;
    for (std::size_t i = 0; i < y.rows; ++i) {
        double* yrow = y.row_ptr(i);
        for (std::size_t j = 0; j < y.cols; ++j) yrow[j] += b.data[j];
    }
    return y;
}

Matrix LinearKernel::backward(const Matrix& d_out) {
    note_backward(d_out);
    add_inplace(tensors_[0].grad, matmul(transpose(cached_input_), d_out));
    add_inplace(tensors_[1].grad, column_sums(d_out));
    return matmul(d_out, transpose(tensors_[0].value));
}

std::unique_ptr<Kernel> LinearKernel::clone() const {
    return std::make_unique<LinearKernel>(*this);
}

MlpKernel::MlpKernel(std::size_t in_dim, std::size_t out_dim, std::size_t hidden_dim,
                     Rng& rng)
    : Kernel({KernelKind::mlp, in_dim, out_dim, hidden_dim}) {
    if (hidden_dim == 0) throw std::invalid_argument("mlp kernel: hidden_dim must be >= 1");
    tensors_.emplace_back("W1", init_weight(in_dim, hidden_dim, rng));
    tensors_.emplace_back("b1", Matrix(1, hidden_dim));
    tensors_.emplace_back("W2", init_weight(hidden_dim, out_dim, rng));
    tensors_.emplace_back("b2", Matrix(1, out_dim));
}

Matrix MlpKernel::forward(const Matrix& x) {
    check_input(x);
    note_forward(x);
    hidden_pre_ = matmul(x, tensors_[0].value);
    const Matrix& b1 = tensors_[1].value;
    for (std::size_t i = 0; i < hidden_pre_.rows; ++i) {
        double* row = hidden_pre_.row_ptr(i);
        for (std::size_t j = 0; j < hidden_pre_.cols; ++j) row[j] += b1.data[j];
    }
    Matrix h(hidden_pre_.rows, hidden_pre_.cols);
    for (std::size_t i = 0; i < h.size(); ++i)
        h.data[i] = hidden_pre_.data[i] > 0.0 ? hidden_pre_.data[i] : 0.0;
    Matrix y = matmul(h, tensors_[2].value);
    const Matrix& b2 = tensors_[3].value;
    for (std::size_t i = 0; i < y.rows; ++i) {
        double* yrow = y.row_ptr(i);
        for (std::size_t j = 0; j < y.cols; ++j) yrow[j] += b2.data[j];
    }
    return y;
}

Matrix MlpKernel::backward(const Matrix& d_out) {
    note_backward(d_out);
    // Recompute relu(hidden_pre_) instead of caching it: cheap and keeps the
    // cache footprint at one activation per kernel.
    Matrix h(hidden_pre_.rows, hidden_pre_.cols);
    for (std::size_t i = 0; i < h.size(); ++i)
        h.data[i] = hidden_pre_.data[i] > 0.0 ? hidden_pre_.data[i] : 0.0;

    add_inplace(tensors_[2].grad, matmul(transpose(h), d_out));
    add_inplace(tensors_[3].grad, column_sums(d_out));

    Matrix d_hidden = matmul(d_out, transpose(tensors_[2].value));
    for (std::size_t i = 0; i < d_hidden.size(); ++i)
        if (hidden_pre_.data[i] <= 0.0) d_hidden.data[i] = 0.0;

    add_inplace(tensors_[0].grad, matmul(transpose(cached_input_), d_hidden));
    add_inplace(tensors_[1].grad, column_sums(d_hidden));
    return matmul(d_hidden, transpose(tensors_[0].value));
}

std::unique_ptr<Kernel> MlpKernel::clone() const {
    return std::make_unique<MlpKernel>(*this);
}

std::unique_ptr<Kernel> make_kernel(const KernelSpec& spec, Rng& rng) {
    if (spec.kind == KernelKind::linear)
        return std::make_unique<LinearKernel>(spec.in_dim, spec.out_dim, rng);
    return std::make_unique<MlpKernel>(spec.in_dim, spec.out_dim, spec.hidden_dim, rng);
}

}  // namespace kunet
