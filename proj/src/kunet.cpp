#include "kunet/kunet.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kunet {

std::vector<std::size_t> KUNetConfig::level_counts() const {
    std::vector<std::size_t> counts;
    std::size_t n = unit_len == 0 ? 0 : lookback / unit_len;
    counts.push_back(n);
    for (std::size_t m : multiples) {
        n /= m;
        counts.push_back(n);
    }
    return counts;
}

void KUNetConfig::validate() const {
    if (unit_len < 1 || hidden_dim < 1)
        throw std::invalid_argument("config: unit_len and hidden_dim must be >= 1");
    std::size_t tiled = unit_len;
    for (std::size_t m : multiples) {
        if (m < 1) throw std::invalid_argument("config: multiples must be >= 1");
        tiled *= m;
    }
    if (tiled != lookback) {
        std::ostringstream msg;
        msg << "config: unit_len * product(multiples) = " << tiled
            << " must equal lookback = " << lookback;
        throw std::invalid_argument(msg.str());
    }
    if (lookback != horizon)
        throw std::invalid_argument("config: lookback and horizon must be equal");
}

const char* to_string(KernelRole role) {
    return role == KernelRole::encoder ? "encoder" : "decoder";
}

std::string kernel_id(KernelRole role, std::size_t level) {
    std::ostringstream id;
    id << (role == KernelRole::encoder ? "enc_l" : "dec_l") << level;
    return id.str();
}

KUNet KUNet::build(const KUNetConfig& config, Rng& rng) {
    config.validate();
    KUNet net;
    net.config_ = config;
    const std::size_t depth = config.depth();
    const std::size_t h = config.hidden_dim;

    for (std::size_t level = 1; level <= depth; ++level) {
        const std::size_t in = level == 1 ? config.unit_len : config.multiples[level - 2] * h;
        KernelSpec spec{config.kernel, in, h, h};
        net.encoder_.push_back(make_kernel(spec, rng));
    }
    for (std::size_t level = 1; level <= depth; ++level) {
        const std::size_t out = level == 1 ? config.unit_len : config.multiples[level - 2] * h;
        KernelSpec spec{config.kernel, h, out, h};
        net.decoder_.push_back(make_kernel(spec, rng));
    }
    return net;
}

KUNet::KUNet(const KUNet& other)
    : config_(other.config_),
      has_cache_(other.has_cache_),
      batch_(other.batch_),
      encoder_out_(other.encoder_out_) {
    encoder_.reserve(other.encoder_.size());
    decoder_.reserve(other.decoder_.size());
    for (const auto& k : other.encoder_) encoder_.push_back(k->clone());
    for (const auto& k : other.decoder_) decoder_.push_back(k->clone());
}

KUNet& KUNet::operator=(const KUNet& other) {
    if (this != &other) {
        KUNet tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

Matrix KUNet::forward(const Matrix& inputs) {
    if (inputs.cols != config_.lookback) {
        std::ostringstream msg;
        msg << "forward: expected " << config_.lookback << " input columns, got "
            << inputs.shape_str();
        throw std::invalid_argument(msg.str());
    }
    const std::size_t depth = config_.depth();
    const std::size_t h = config_.hidden_dim;
    const std::size_t batch = inputs.rows;
    const auto counts = config_.level_counts();

    encoder_out_.assign(depth, Matrix());
    batch_ = batch;

    // Encoder: fold patches into rows, one kernel call per level.
    Matrix x = inputs.reshaped(batch * counts[0], config_.unit_len);
    encoder_out_[0] = encoder_[0]->forward(x);
    for (std::size_t level = 2; level <= depth; ++level) {
        const std::size_t m = config_.multiples[level - 2];
        Matrix grouped = encoder_out_[level - 2].reshaped(batch * counts[level - 1], m * h);
        encoder_out_[level - 1] = encoder_[level - 1]->forward(grouped);
    }

    // Decoder: expand from the bottleneck, adding the matching encoder
    // latent before each lower level's kernel runs.
    Matrix d = encoder_out_[depth - 1];
    for (std::size_t level = depth; level >= 2; --level) {
        const std::size_t m = config_.multiples[level - 2];
        Matrix expanded = decoder_[level - 1]->forward(d);
        d = std::move(expanded).reshaped(batch * counts[level - 2], h);
        add_inplace(d, encoder_out_[level - 2]);
    }
    Matrix out = decoder_[0]->forward(d);
    has_cache_ = true;
    return std::move(out).reshaped(batch, config_.horizon);
}

std::vector<double> KUNet::forward(const std::vector<double>& input) {
    Matrix m(1, input.size());
    m.data = input;
    Matrix pred = forward(m);
    return pred.data;
}

void KUNet::backward(const Matrix& d_predictions) {
    if (!has_cache_)
        throw std::runtime_error("backward called before forward (no cached activations)");
    if (d_predictions.rows != batch_ || d_predictions.cols != config_.horizon) {
        std::ostringstream msg;
        msg << "backward: expected " << batch_ << "x" << config_.horizon
            << " prediction gradient, got " << d_predictions.shape_str();
        throw std::invalid_argument(msg.str());
    }
    const std::size_t depth = config_.depth();
    const std::size_t h = config_.hidden_dim;
    const auto counts = config_.level_counts();

    // Decoder side; stash the gradient each skip connection feeds back into
    // its encoder latent.
    std::vector<Matrix> skip_grad(depth);  // [level-1], levels 1..depth-1 used
    Matrix g = d_predictions.reshaped(batch_ * counts[0], config_.unit_len);
    for (std::size_t level = 1; level < depth; ++level) {
        Matrix d_in = decoder_[level - 1]->backward(g);
        skip_grad[level - 1] = d_in;
        const std::size_t m = config_.multiples[level - 1];
        g = std::move(d_in).reshaped(batch_ * counts[level], m * h);
    }
    Matrix d_bottleneck = decoder_[depth - 1]->backward(g);

    // Encoder side, top level first: the gradient at each encoder output is
    // the sum of the path through the level above and the decoder skip.
    Matrix d_out = std::move(d_bottleneck);
    for (std::size_t level = depth; level >= 1; --level) {
        if (level < depth) add_inplace(d_out, skip_grad[level - 1]);
        Matrix d_in = encoder_[level - 1]->backward(d_out);
        if (level == 1) break;
        d_out = std::move(d_in).reshaped(batch_ * counts[level - 2], h);
    }
}

void KUNet::zero_grads() {
    for (auto& k : encoder_) k->zero_grads();
    for (auto& k : decoder_) k->zero_grads();
}

std::map<std::size_t, std::size_t> KUNet::invocation_counts() const {
    std::map<std::size_t, std::size_t> counts;
    const auto per_level = config_.level_counts();
    for (std::size_t level = 1; level <= config_.depth(); ++level)
        counts[level] = per_level[level - 1];
    return counts;
}

std::map<std::size_t, std::size_t> KUNet::measured_invocation_counts(
    std::size_t windows) const {
    if (windows == 0) throw std::invalid_argument("measured_invocation_counts: no windows");
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t level = 1; level <= config_.depth(); ++level)
        counts[level] = encoder_[level - 1]->applications() / windows;
    return counts;
}

void KUNet::reset_instrumentation() {
    for (auto& k : encoder_) k->reset_applications();
    for (auto& k : decoder_) k->reset_applications();
}

std::map<std::string, double> KUNet::grad_stats() const {
    std::map<std::string, double> stats;
    for (std::size_t level = 1; level <= config_.depth(); ++level) {
        stats[kernel_id(KernelRole::encoder, level)] = encoder_[level - 1]->mean_abs_grad();
        stats[kernel_id(KernelRole::decoder, level)] = decoder_[level - 1]->mean_abs_grad();
    }
    return stats;
}

std::vector<ParamBinding> KUNet::parameters() {
    std::vector<ParamBinding> bindings;
    for (std::size_t level = 1; level <= config_.depth(); ++level)
        for (ParamTensor& t : encoder_[level - 1]->tensors())
            bindings.push_back({kernel_id(KernelRole::encoder, level), KernelRole::encoder,
                                level, &t});
    for (std::size_t level = 1; level <= config_.depth(); ++level)
        for (ParamTensor& t : decoder_[level - 1]->tensors())
            bindings.push_back({kernel_id(KernelRole::decoder, level), KernelRole::decoder,
                                level, &t});
    return bindings;
}

std::size_t KUNet::param_count() const {
    std::size_t n = 0;
    for (const auto& k : encoder_) n += k->param_count();
    for (const auto& k : decoder_) n += k->param_count();
    return n;
}

std::vector<Matrix> KUNet::snapshot_params() const {
    std::vector<Matrix> snap;
    for (const auto& k : encoder_)
        for (const ParamTensor& t : k->tensors()) snap.push_back(t.value);
    for (const auto& k : decoder_)
        for (const ParamTensor& t : k->tensors()) snap.push_back(t.value);
    return snap;
}

void KUNet::restore_params(const std::vector<Matrix>& snapshot) {
    std::size_t i = 0;
    auto restore = [&](std::vector<std::unique_ptr<Kernel>>& kernels) {
        for (auto& k : kernels)
            for (ParamTensor& t : k->tensors()) {
                if (i >= snapshot.size() || !snapshot[i].same_shape(t.value))
                    throw std::invalid_argument("restore_params: snapshot shape mismatch");
                t.value = snapshot[i++];
            }
    };
    restore(encoder_);
    restore(decoder_);
    if (i != snapshot.size())
        throw std::invalid_argument("restore_params: snapshot tensor count mismatch");
}

namespace {

nlohmann::json kernel_to_json(const Kernel& kernel, KernelRole role, std::size_t level) {
    nlohmann::json tensors = nlohmann::json::object();
    for (const ParamTensor& t : kernel.tensors()) {
        tensors[t.name] = {{"rows", t.value.rows},
                           {"cols", t.value.cols},
                           {"data", t.value.data}};
    }
    return {{"id", kernel_id(role, level)},
            {"role", to_string(role)},
            {"level", level},
            {"kind", to_string(kernel.spec().kind)},
            {"in_dim", kernel.spec().in_dim},
            {"out_dim", kernel.spec().out_dim},
            {"hidden_dim", kernel.spec().hidden_dim},
            {"tensors", tensors}};
}

void kernel_from_json(Kernel& kernel, const nlohmann::json& j) {
    for (ParamTensor& t : kernel.tensors()) {
        const nlohmann::json& jt = j.at("tensors").at(t.name);
        Matrix m(jt.at("rows").get<std::size_t>(), jt.at("cols").get<std::size_t>());
        m.data = jt.at("data").get<std::vector<double>>();
        if (m.data.size() != m.rows * m.cols || !m.same_shape(t.value))
            throw std::runtime_error("checkpoint: tensor shape mismatch for " + t.name);
        t.value = std::move(m);
    }
}

}  // namespace

std::string KUNet::to_json_string() const {
    nlohmann::json j;
    j["format"] = "kunet-checkpoint-v1";
    j["config"] = {{"lookback", config_.lookback},
                   {"horizon", config_.horizon},
                   {"unit_len", config_.unit_len},
                   {"multiples", config_.multiples},
                   {"hidden_dim", config_.hidden_dim},
                   {"kernel", to_string(config_.kernel)}};
    nlohmann::json kernels = nlohmann::json::array();
    for (std::size_t level = 1; level <= config_.depth(); ++level)
        kernels.push_back(kernel_to_json(*encoder_[level - 1], KernelRole::encoder, level));
    for (std::size_t level = 1; level <= config_.depth(); ++level)
        kernels.push_back(kernel_to_json(*decoder_[level - 1], KernelRole::decoder, level));
    j["kernels"] = kernels;
    return j.dump(2);
}

KUNet KUNet::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "kunet-checkpoint-v1")
        throw std::runtime_error("checkpoint: unknown format tag");
    KUNetConfig config;
    const nlohmann::json& jc = j.at("config");
    config.lookback = jc.at("lookback").get<std::size_t>();
    config.horizon = jc.at("horizon").get<std::size_t>();
    config.unit_len = jc.at("unit_len").get<std::size_t>();
    config.multiples = jc.at("multiples").get<std::vector<std::size_t>>();
    config.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
    config.kernel = kernel_kind_from_string(jc.at("kernel").get<std::string>());

    Rng rng(0);  // placeholder init, overwritten below
    KUNet net = build(config, rng);
    for (const nlohmann::json& jk : j.at("kernels")) {
        const std::string role = jk.at("role").get<std::string>();
        const std::size_t level = jk.at("level").get<std::size_t>();
        Kernel& kernel = role == "encoder" ? net.encoder_kernel(level)
                                           : net.decoder_kernel(level);
        kernel_from_json(kernel, jk);
    }
    return net;
}

void KUNet::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << to_json_string() << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

KUNet KUNet::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_string(buffer.str());
}

}  // namespace kunet
