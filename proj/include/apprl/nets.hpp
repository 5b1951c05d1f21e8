#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "apprl/errors.hpp"
#include "apprl/nn.hpp"

namespace apprl {

// Architecture description. Defaults follow the reference dimensions: three
// convolutions (kernels 2, 2, 1) into a single-head self-attention block,
// flattened to positions * conv3 features (6400 for a 7x7x3 input).
struct NetConfig {
    int view = 7;
    int in_channels = 3;
    int conv1 = 32;
    int conv2 = 64;
    int conv3 = 256;
    int dense1 = 256;
    int dense2 = 64;
    int actions = 3;
    int aux_width = 6;

    void validate() const {
        if (view < 3) throw ConfigError("net: view size must be at least 3");
        if (conv1 < 1 || conv2 < 1 || conv3 < 1 || dense1 < 1 || dense2 < 1)
            throw ConfigError("net: layer widths must be positive");
        if (aux_width != 0 && aux_width != 6) throw ConfigError("net: aux width must be 0 or 6");
    }

    int positions() const { return (view - 2) * (view - 2); }
    int feature_dim() const { return positions() * conv3; }
    int obs_dim() const { return in_channels * view * view; }

    std::string fingerprint() const {
        std::ostringstream os;
        os << "net/v1 obs=" << view << "x" << view << "x" << in_channels << " conv=2x" << conv1
           << ",2x" << conv2 << ",1x" << conv3 << " attn=" << conv3 << " actor=" << dense1 << ","
           << dense2 << "," << actions << " critic=+" << aux_width << "," << dense1 << "," << dense2
           << ",1 nre=+" << actions << "," << dense1 << "," << dense2 << ",1";
        return os.str();
    }

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Shared convolutional encoder with self-attention.
template <class S>
class Encoder {
  public:
    explicit Encoder(const NetConfig& cfg)
        : c1_(cfg.view, cfg.view, cfg.in_channels, cfg.conv1, 2, "encoder.conv1"),
          c2_(cfg.view - 1, cfg.view - 1, cfg.conv1, cfg.conv2, 2, "encoder.conv2"),
          c3_(cfg.view - 2, cfg.view - 2, cfg.conv2, cfg.conv3, 1, "encoder.conv3"),
          attn_(cfg.positions(), cfg.conv3, "encoder.attn") {}

    Mat<S> forward(const Mat<S>& obs, bool cache) {
        Mat<S> h = relu(c1_.forward(obs, cache));
        if (cache) a1_ = h;
        h = relu(c2_.forward(h, cache));
        if (cache) a2_ = h;
        h = relu(c3_.forward(h, cache));
        if (cache) a3_ = h;
        return attn_.forward(h, cache);
    }

    Mat<S> backward(const Mat<S>& dfeat) {
        Mat<S> d = attn_.backward(dfeat);
        d.array() *= (a3_.array() > S(0)).template cast<S>();
        d = c3_.backward(d);
        d.array() *= (a2_.array() > S(0)).template cast<S>();
        d = c2_.backward(d);
        d.array() *= (a1_.array() > S(0)).template cast<S>();
        return c1_.backward(d);
    }

    void collect(std::vector<ParamRef<S>>& out) {
        c1_.collect(out);
        c2_.collect(out);
        c3_.collect(out);
        attn_.collect(out);
    }

    const SelfAttention<S>& attention() const { return attn_; }

  private:
    static Mat<S> relu(Mat<S> x) { return x.cwiseMax(S(0)); }

    Conv2d<S> c1_, c2_, c3_;
    SelfAttention<S> attn_;
    Mat<S> a1_, a2_, a3_;
};

// Shared encoder plus the three heads: actor (policy logits), critic
// (value, optionally conditioned on a 6-wide auxiliary vector) and the
// next-reward estimator.
template <class S>
class PolicyNets {
  public:
    explicit PolicyNets(const NetConfig& cfg)
        : cfg_(validated(cfg)),
          encoder_(cfg),
          actor_({cfg.feature_dim(), cfg.dense1, cfg.dense2, cfg.actions}, "actor"),
          critic_({cfg.feature_dim() + cfg.aux_width, cfg.dense1, cfg.dense2, 1}, "critic"),
          nre_({cfg.feature_dim() + cfg.actions, cfg.dense1, cfg.dense2, 1}, "nre") {}

    const NetConfig& config() const { return cfg_; }

    // Deterministic initialization: orthogonal weights (gain sqrt(2) for
    // hidden layers, 1 for attention projections and value-style outputs,
    // 0.01 for the actor output), zero biases.
    void init(std::uint64_t seed) {
        Rng rng = Rng(seed).fork(0x6e657473);
        for (auto& p : params()) {
            if (p.name.ends_with(".b")) {
                p.value->setZero();
                continue;
            }
            double gain = std::sqrt(2.0);
            if (p.name.find("encoder.attn") != std::string::npos) gain = 1.0;
            if (p.name == "actor.l2.w") gain = 0.01;
            if (p.name == "critic.l2.w" || p.name == "nre.l2.w") gain = 1.0;
            orthogonal_init(*p.value, gain, rng);
        }
    }

    std::vector<ParamRef<S>> params() {
        std::vector<ParamRef<S>> out;
        encoder_.collect(out);
        actor_.collect(out);
        critic_.collect(out);
        nre_.collect(out);
        return out;
    }

    Mat<S> encode(const Mat<S>& obs, bool cache = false) {
        if (obs.rows() != cfg_.obs_dim())
            throw std::invalid_argument("encode: observation batch has wrong dimension");
        return encoder_.forward(obs, cache);
    }

    Mat<S> actor_logits(const Mat<S>& features, bool cache = false) {
        return actor_.forward(features, cache);
    }

    // aux must have exactly aux_width rows (0 rows in baseline mode).
    Mat<S> critic_value(const Mat<S>& features, const Mat<S>& aux, bool cache = false) {
        if (aux.rows() != cfg_.aux_width || (cfg_.aux_width > 0 && aux.cols() != features.cols()))
            throw std::invalid_argument("critic: auxiliary input width does not match the configured mode");
        return critic_.forward(vstack(features, aux), cache);
    }

    Mat<S> nre_predict(const Mat<S>& features, const Mat<S>& action_probs, bool cache = false) {
        if (action_probs.rows() != cfg_.actions || action_probs.cols() != features.cols())
            throw std::invalid_argument("nre: action probability input has wrong shape");
        return nre_.forward(vstack(features, action_probs), cache);
    }

    // Backward passes return the gradient w.r.t. the encoder features.
    Mat<S> actor_backward(const Mat<S>& dlogits) { return actor_.backward(dlogits); }

    Mat<S> critic_backward(const Mat<S>& dvalue) {
        return critic_.backward(dvalue).topRows(cfg_.feature_dim());
    }

    Mat<S> nre_backward(const Mat<S>& dout) {
        return nre_.backward(dout).topRows(cfg_.feature_dim());
    }

    void encoder_backward(const Mat<S>& dfeatures) { encoder_.backward(dfeatures); }

    const Encoder<S>& encoder() const { return encoder_; }

  private:
    static const NetConfig& validated(const NetConfig& cfg) {
        cfg.validate();
        return cfg;
    }

    static Mat<S> vstack(const Mat<S>& top, const Mat<S>& bottom) {
        if (bottom.rows() == 0) return top;
        Mat<S> out(top.rows() + bottom.rows(), top.cols());
        out.topRows(top.rows()) = top;
        out.bottomRows(bottom.rows()) = bottom;
        return out;
    }

    NetConfig cfg_;
    Encoder<S> encoder_;
    Mlp<S> actor_;
    Mlp<S> critic_;
    Mlp<S> nre_;
};

// Checkpoint layout: magic, version, fingerprint, parameter count, then all
// parameters as little-endian IEEE-754 single precision in params() order.
inline constexpr char kCheckpointMagic[8] = {'A', 'P', 'P', 'R', 'L', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

template <class S>
void save_checkpoint(const std::string& path, PolicyNets<S>& nets) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
    const std::string fp = nets.config().fingerprint();
    const std::uint32_t fp_len = static_cast<std::uint32_t>(fp.size());
    out.write(reinterpret_cast<const char*>(&fp_len), sizeof(fp_len));
    out.write(fp.data(), fp_len);
    const auto params = nets.params();
    const std::uint64_t count = param_count(params);
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& p : params) {
        const Mat<float> m = p.value->template cast<float>();
        out.write(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(float));
    }
    if (!out) throw CheckpointError("checkpoint write failed: " + path);
}

template <class S>
void load_checkpoint(const std::string& path, PolicyNets<S>& nets) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
        throw CheckpointError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    std::uint32_t fp_len = 0;
    in.read(reinterpret_cast<char*>(&fp_len), sizeof(fp_len));
    std::string fp(fp_len, '\0');
    in.read(fp.data(), fp_len);
    const std::string expected = nets.config().fingerprint();
    if (fp != expected)
        throw CheckpointError("architecture fingerprint mismatch\n  checkpoint: " + fp +
                              "\n  expected:   " + expected);
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    const auto params = nets.params();
    if (count != param_count(params))
        throw CheckpointError("checkpoint parameter count mismatch");
    for (const auto& p : params) {
        Mat<float> m(p.value->rows(), p.value->cols());
        in.read(reinterpret_cast<char*>(m.data()), m.size() * sizeof(float));
        *p.value = m.template cast<S>();
    }
    if (!in) throw CheckpointError("checkpoint truncated: " + path);
}

}  // namespace apprl
