#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kunet/kunet.hpp"
#include "kunet/matrix.hpp"

namespace kunet {

enum class OptimKind { sgd, sgdm, adam, ew_sgdm };

const char* to_string(OptimKind kind);
OptimKind optim_kind_from_string(const std::string& name);

/// Exponential level weight W(l) = S^(l-1), level 1 -> 1. Computed by
/// iterated multiplication so the recurrence W(l+1) = S * W(l) is exact.
double level_weight(std::size_t level, double base);

/// The per-level weight table for a net of the given depth.
/// uniform(S, depth) gives {1, S, S^2, ...}; from_multiples generalizes to
/// unequal grouping factors via cumulative products.
struct WeightSchedule {
    double base = 1.0;
    std::vector<double> weights;  // [level-1]

    static WeightSchedule uniform(double base, std::size_t depth);
    static WeightSchedule from_multiples(const std::vector<std::size_t>& multiples);

    std::size_t depth() const { return weights.size(); }
    double weight(std::size_t level) const;
};

// Single-tensor update rules. These are the whole algorithm; the Optimizer
// class below only wires them to a net's parameter list.
void sgd_apply(Matrix& param, const Matrix& grad, double lr);
void sgdm_apply(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                double momentum);
void adam_apply(Matrix& param, const Matrix& grad, Matrix& m1, Matrix& m2,
                std::int64_t step, double lr, double beta1, double beta2, double eps);

struct OptimizerConfig {
    OptimKind kind = OptimKind::sgdm;
    double lr = 1e-3;
    double momentum = 0.9;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double ew_base = 8.0;  // EW-SGDM only
};

/// Owns the per-parameter auxiliary buffers for one training run. For
/// EW-SGDM each kernel's gradient is pre-scaled by the Exponential level
/// weight before entering the momentum buffer; everything after that is
/// plain SGDM.
class Optimizer {
  public:
    Optimizer(OptimizerConfig config, KUNet& net);

    void step(KUNet& net);

    std::int64_t step_count() const { return step_count_; }
    const OptimizerConfig& config() const { return config_; }
    const WeightSchedule& schedule() const { return schedule_; }

    /// Effective-update weight for a kernel at `level`: the EW schedule
    /// weight for EW-SGDM, 1 otherwise.
    double effective_weight(std::size_t level) const;

  private:
    OptimizerConfig config_;
    WeightSchedule schedule_;
    std::size_t net_depth_ = 0;
    std::int64_t step_count_ = 0;
    std::vector<Matrix> velocity_;  // SGDM / EW-SGDM / Adam m1
    std::vector<Matrix> moment2_;   // Adam only
};

/// Verification harness for the gradient-accumulation identities.
/// For each (role, level):
///   scaling: the weighted accumulated gradient equals S^(l-1) times the
///            unweighted one (relative 1e-12, on the supplied batch), with
///            the weighted side recovered from a real EW-SGDM update;
///   collapse: a kernel whose per-window applications all see the same
///            patch and the same output gradient accumulates exactly
///            (applications per window) x the single-patch gradient
///            (relative 1e-10). A constant window supplies the
///            representative patch and gradient per level.
struct IdentityRow {
    std::string kernel_id;
    KernelRole role = KernelRole::encoder;
    std::size_t level = 0;
    double scaling_rel_err = 0.0;
    bool scaling_pass = false;
    std::size_t applications = 0;
    double collapse_rel_err = 0.0;
    bool collapse_pass = false;
};

struct IdentityReport {
    std::vector<IdentityRow> rows;
    bool all_pass = false;
    double scaling_tolerance = 1e-12;
    double collapse_tolerance = 1e-10;
};

IdentityReport weighted_grad_identity_check(KUNet& net, const Matrix& batch_inputs,
                                            const Matrix& batch_targets, double ew_base);

}  // namespace kunet
