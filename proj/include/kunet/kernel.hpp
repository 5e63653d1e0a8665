#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kunet/matrix.hpp"
#include "kunet/rng.hpp"

namespace kunet {

enum class KernelKind { linear, mlp };

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t hidden_dim = 0;  // MLP only
};

/// One named parameter tensor with its same-shape gradient buffer.
struct ParamTensor {
    std::string name;
    Matrix value;
    Matrix grad;

    ParamTensor(std::string n, Matrix v) : name(std::move(n)), grad(v.rows, v.cols) {
        value = std::move(v);
    }
};

/// A small learnable map applied identically to every patch at one level of
/// the hierarchy. Inputs arrive with patches folded into rows, so forward and
/// backward are plain row-wise affine algebra. The kernel caches whatever the
/// exact backward pass needs; backward accumulates into the grad buffers and
/// returns the gradient w.r.t. its input.
class Kernel {
  public:
    virtual ~Kernel() = default;

    virtual Matrix forward(const Matrix& x) = 0;
    virtual Matrix backward(const Matrix& d_out) = 0;
    virtual std::unique_ptr<Kernel> clone() const = 0;

    const KernelSpec& spec() const { return spec_; }
    std::vector<ParamTensor>& tensors() { return tensors_; }
    const std::vector<ParamTensor>& tensors() const { return tensors_; }

    void zero_grads();
    /// Mean of |grad| over every parameter entry of this kernel.
    double mean_abs_grad() const;
    std::size_t param_count() const;

    bool has_cache() const { return has_cache_; }
    const Matrix& cached_input() const { return cached_input_; }
    /// Output gradient seen by the last backward (instrumentation).
    const Matrix& cached_output_grad() const { return cached_output_grad_; }

    /// Patch applications (rows) processed by forward since the last reset.
    std::size_t applications() const { return applications_; }
    void reset_applications() { applications_ = 0; }

  protected:
    explicit Kernel(KernelSpec spec) : spec_(spec) {}

    void check_input(const Matrix& x) const;
    void note_forward(const Matrix& x);
    void note_backward(const Matrix& d_out) ;

    KernelSpec spec_;
    std::vector<ParamTensor> tensors_;
    bool has_cache_ = false;
    Matrix cached_input_;
    Matrix cached_output_grad_;
    std::size_t applications_ = 0;
};

/// y = x W + b
class LinearKernel : public Kernel {
  public:
    LinearKernel(std::size_t in_dim, std::size_t out_dim, Rng& rng);

    Matrix forward(const Matrix& x) override;
    Matrix backward(const Matrix& d_out) override;
    std::unique_ptr<Kernel> clone() const override;
};

/// y = relu(x W1 + b1) W2 + b2, one hidden layer of width hidden_dim.
class MlpKernel : public Kernel {
  public:
    MlpKernel(std::size_t in_dim, std::size_t out_dim, std::size_t hidden_dim, Rng& rng);

    Matrix forward(const Matrix& x) override;
    Matrix backward(const Matrix& d_out) override;
    std::unique_ptr<Kernel> clone() const override;

  private:
    Matrix hidden_pre_;  // pre-activation cache
};

std::unique_ptr<Kernel> make_kernel(const KernelSpec& spec, Rng& rng);

}  // namespace kunet
