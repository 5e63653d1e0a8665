#include "kunet/loss.hpp"

#include <stdexcept>
#include <string>

namespace kunet {

namespace {

void check_lengths(std::size_t pred, std::size_t target) {
    if (pred == 0) throw std::invalid_argument("mse: empty sequences");
    if (pred != target)
        throw std::invalid_argument("mse: length mismatch (" + std::to_string(pred) +
                                    " vs " + std::to_string(target) + ")");
}

}  // namespace

double mse(const std::vector<double>& pred, const std::vector<double>& target) {
    check_lengths(pred.size(), target.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

double mse(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("mse: shape mismatch (" + pred.shape_str() + " vs " +
                                    target.shape_str() + ")");
    check_lengths(pred.size(), target.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

std::vector<double> mse_grad(const std::vector<double>& pred,
                             const std::vector<double>& target) {
    check_lengths(pred.size(), target.size());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    std::vector<double> g(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g[i] = 2.0 * (pred[i] - target[i]) * inv_n;
    return g;
}

Matrix mse_grad(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("mse_grad: shape mismatch (" + pred.shape_str() +
                                    " vs " + target.shape_str() + ")");
    check_lengths(pred.size(), target.size());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    Matrix g(pred.rows, pred.cols);
    for (std::size_t i = 0; i < pred.size(); ++i)
        g.data[i] = 2.0 * (pred.data[i] - target.data[i]) * inv_n;
    return g;
}

}  // namespace kunet
