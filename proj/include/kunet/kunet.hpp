#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "kunet/kernel.hpp"
#include "kunet/matrix.hpp"
#include "kunet/rng.hpp"

namespace kunet {

/// Patch-hierarchy configuration. With unit_len u and multiples [m1, m2],
/// lookback = u * m1 * m2 and the hierarchy is depth 3: level 1 maps raw
/// patches of u values, level 2 groups m1 adjacent latents, level 3 groups m2.
struct KUNetConfig {
    std::size_t lookback = 512;
    std::size_t horizon = 512;
    std::size_t unit_len = 8;
    std::vector<std::size_t> multiples = {8, 8};
    std::size_t hidden_dim = 128;
    KernelKind kernel = KernelKind::mlp;

    std::size_t depth() const { return 1 + multiples.size(); }
    /// Level-l encoder kernel applications per window (l in 1..depth):
    /// lookback/unit_len at level 1, divided by multiples[l-2] thereafter.
    std::vector<std::size_t> level_counts() const;
    void validate() const;
};

enum class KernelRole { encoder, decoder };

const char* to_string(KernelRole role);

/// Handle to one parameter tensor plus its position in the hierarchy;
/// optimizers consume the net through a flat list of these.
struct ParamBinding {
    std::string kernel_id;  // e.g. "enc_l2"
    KernelRole role;
    std::size_t level;  // 1 = raw-resolution patches, depth() = bottleneck
    ParamTensor* tensor;
};

/// Kernel U-Net: a symmetric encoder-decoder over a patch hierarchy.
///
/// Forward (batch of B windows, each of length L):
///   encoder  level 1: split each window into L/u patches of u values and
///            apply the level-1 kernel to every patch (patches are folded
///            into matrix rows, so one kernel call covers the whole level);
///            level l>1: concatenate multiples[l-2] adjacent latents and
///            apply the level-l kernel, down to one bottleneck latent.
///   decoder  mirrors the encoder: each level expands one latent into
///            multiples[l-2] latents (one kernel emitting m*hidden values,
///            split back into m latents); the encoder latent at the matching
///            level is added in before the kernel of the level below runs
///            (additive skip connections); the last kernel emits u values
///            per patch, concatenated to the length-T prediction.
///
/// backward() retraces this composition exactly, accumulating into each
/// kernel's grad buffers, including the skip-connection routing. Level
/// weighting is deliberately absent here; it belongs to the optimizer.
class KUNet {
  public:
    static KUNet build(const KUNetConfig& config, Rng& rng);

    KUNet(const KUNet& other);
    KUNet& operator=(const KUNet& other);
    KUNet(KUNet&&) = default;
    KUNet& operator=(KUNet&&) = default;

    /// (B, L) batch in, (B, T) predictions out. Caches activations.
    Matrix forward(const Matrix& inputs);
    /// Single-window convenience wrapper.
    std::vector<double> forward(const std::vector<double>& input);

    /// Accumulates dLoss/dParam for the (B, T) prediction gradient of the
    /// last forward. Throws if no forward preceded it.
    void backward(const Matrix& d_predictions);

    void zero_grads();

    /// level -> encoder kernel applications per window (config arithmetic).
    std::map<std::size_t, std::size_t> invocation_counts() const;
    /// level -> applications actually performed per window since the last
    /// reset, measured by the kernels themselves.
    std::map<std::size_t, std::size_t> measured_invocation_counts(std::size_t windows) const;
    void reset_instrumentation();

    /// kernel id -> mean |grad| over that kernel's parameters.
    std::map<std::string, double> grad_stats() const;

    const KUNetConfig& config() const { return config_; }
    std::size_t depth() const { return config_.depth(); }

    Kernel& encoder_kernel(std::size_t level) { return *encoder_[level - 1]; }
    Kernel& decoder_kernel(std::size_t level) { return *decoder_[level - 1]; }
    const Kernel& encoder_kernel(std::size_t level) const { return *encoder_[level - 1]; }
    const Kernel& decoder_kernel(std::size_t level) const { return *decoder_[level - 1]; }

    /// Flat deterministic order: encoder levels 1..depth, then decoder
    /// levels 1..depth, tensors in kernel-declared order.
    std::vector<ParamBinding> parameters();

    std::size_t param_count() const;

    std::vector<Matrix> snapshot_params() const;
    void restore_params(const std::vector<Matrix>& snapshot);

    /// Checkpoint I/O (JSON, bitwise round-trip of every parameter).
    void save(const std::filesystem::path& path) const;
    static KUNet load(const std::filesystem::path& path);
    std::string to_json_string() const;
    static KUNet from_json_string(const std::string& text);

  private:
    KUNet() = default;

    KUNetConfig config_;
    std::vector<std::unique_ptr<Kernel>> encoder_;  // [level-1]
    std::vector<std::unique_ptr<Kernel>> decoder_;  // [level-1]

    // forward cache
    bool has_cache_ = false;
    std::size_t batch_ = 0;
    std::vector<Matrix> encoder_out_;  // per level, rows = B * count(level)
};

std::string kernel_id(KernelRole role, std::size_t level);

}  // namespace kunet
