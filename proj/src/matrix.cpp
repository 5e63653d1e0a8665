#include "kunet/matrix.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace kunet {

namespace {

[[noreturn]] void throw_shape_error(const char* what, const Matrix& a, const Matrix& b) {
    std::ostringstream msg;
    msg << what << ": lhs is " << a.shape_str() << ", rhs is " << b.shape_str();
    throw std::invalid_argument(msg.str());
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& values) {
    if (values.empty()) return Matrix();
    Matrix m(values.size(), values[0].size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != m.cols)
            throw std::invalid_argument("from_rows: ragged row lengths");
        for (std::size_t j = 0; j < m.cols; ++j) m.at(i, j) = values[i][j];
    }
    return m;
}

std::string Matrix::shape_str() const {
    std::ostringstream s;
    s << rows << "x" << cols;
    return s.str();
}

void Matrix::fill(double v) {
    for (double& x : data) x = v;
}

bool Matrix::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

Matrix Matrix::reshaped(std::size_t r, std::size_t c) const& {
    if (r * c != data.size())
        throw std::invalid_argument("reshaped: element count mismatch (" + shape_str() +
                                    " -> " + std::to_string(r) + "x" + std::to_string(c) + ")");
    Matrix m;
    m.rows = r;
    m.cols = c;
    m.data = data;
    return m;
}

Matrix Matrix::reshaped(std::size_t r, std::size_t c) && {
    if (r * c != data.size())
        throw std::invalid_argument("reshaped: element count mismatch (" + shape_str() +
                                    " -> " + std::to_string(r) + "x" + std::to_string(c) + ")");
    Matrix m;
    m.rows = r;
    m.cols = c;
    m.data = std::move(data);
    rows = cols = 0;
    return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw_shape_error("matmul: inner dimensions differ", a, b);
    Matrix c(a.rows, b.cols);
    // i-k-j order keeps the inner loop streaming over contiguous rows.
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Matrix elementwise(const Matrix& a, const Matrix& b, ElemOp op) {
    if (!a.same_shape(b)) throw_shape_error("elementwise: shapes differ", a, b);
    Matrix c(a.rows, a.cols);
    const std::size_t n = a.size();
    switch (op) {
        case ElemOp::add:
            for (std::size_t i = 0; i < n; ++i) c.data[i] = a.data[i] + b.data[i];
            break;
        case ElemOp::sub:
            for (std::size_t i = 0; i < n; ++i) c.data[i] = a.data[i] - b.data[i];
            break;
        case ElemOp::mul:
            for (std::size_t i = 0; i < n; ++i) c.data[i] = a.data[i] * b.data[i];
            break;
    }
    return c;
}

Matrix scale(const Matrix& a, double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("scale: non-finite scalar");
    Matrix out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] * c;
    return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw_shape_error("add_inplace: shapes differ", a, b);
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

void axpy_inplace(Matrix& a, double c, const Matrix& b) {
    if (!a.same_shape(b)) throw_shape_error("axpy_inplace: shapes differ", a, b);
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += c * b.data[i];
}

Matrix column_sums(const Matrix& a) {
    Matrix s(1, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols; ++j) s.data[j] += arow[j];
    }
    return s;
}

double mean_abs(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    double sum = 0.0;
    for (double x : a.data) sum += std::fabs(x);
    return sum / static_cast<double>(a.size());
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double x : a.data) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace kunet
