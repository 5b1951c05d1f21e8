#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "apprl/nets.hpp"
#include "apprl/rng.hpp"

using namespace apprl;

namespace {

NetConfig reduced_config() {
    NetConfig cfg;
    cfg.view = 5;
    cfg.conv1 = 3;
    cfg.conv2 = 4;
    cfg.conv3 = 6;
    cfg.dense1 = 8;
    cfg.dense2 = 6;
    cfg.aux_width = 6;
    return cfg;
}

struct LossWeights {
    Mat<double> logits;    // linear term per logit
    Mat<double> logits_sq; // quadratic term per logit
    Mat<double> value, value_sq;
    Mat<double> nre, nre_sq;
};

// Composite scalar loss touching all three heads so gradients flow through
// every layer, including the shared encoder.
struct GradProbe {
    Mat<double> obs, aux, probs;
    LossWeights w;
    bool use_actor = true, use_critic = true, use_nre = true;

    double loss(PolicyNets<double>& nets, bool cache) const {
        double total = 0.0;
        const Mat<double> feat = nets.encode(obs, cache);
        if (use_actor) {
            const Mat<double> logits = nets.actor_logits(feat, cache);
            total += (w.logits.cwiseProduct(logits) + w.logits_sq.cwiseProduct(logits.cwiseProduct(logits))).sum();
        }
        if (use_critic) {
            const Mat<double> v = nets.critic_value(feat, aux, cache);
            total += (w.value.cwiseProduct(v) + w.value_sq.cwiseProduct(v.cwiseProduct(v))).sum();
        }
        if (use_nre) {
            const Mat<double> p = nets.nre_predict(feat, probs, cache);
            total += (w.nre.cwiseProduct(p) + w.nre_sq.cwiseProduct(p.cwiseProduct(p))).sum();
        }
        return total;
    }

    void backward(PolicyNets<double>& nets) const {
        const int fd = nets.config().feature_dim();
        Mat<double> dfeat = Mat<double>::Zero(fd, obs.cols());
        // forward with caches, then push analytic output gradients back
        const Mat<double> feat = nets.encode(obs, true);
        if (use_actor) {
            const Mat<double> logits = nets.actor_logits(feat, true);
            const Mat<double> dlogits = w.logits + 2.0 * w.logits_sq.cwiseProduct(logits);
            dfeat += nets.actor_backward(dlogits);
        }
        if (use_critic) {
            const Mat<double> v = nets.critic_value(feat, aux, true);
            const Mat<double> dv = w.value + 2.0 * w.value_sq.cwiseProduct(v);
            dfeat += nets.critic_backward(dv);
        }
        if (use_nre) {
            const Mat<double> p = nets.nre_predict(feat, probs, true);
            const Mat<double> dp = w.nre + 2.0 * w.nre_sq.cwiseProduct(p);
            dfeat += nets.nre_backward(dp);
        }
        nets.encoder_backward(dfeat);
    }
};

GradProbe make_probe(const NetConfig& cfg, int batch, Rng& rng) {
    GradProbe probe;
    probe.obs = Mat<double>(cfg.obs_dim(), batch);
    for (int j = 0; j < batch; ++j)
        for (int i = 0; i < cfg.obs_dim(); ++i) probe.obs(i, j) = rng.uniform();
    probe.aux = Mat<double>(cfg.aux_width, batch);
    for (int j = 0; j < batch; ++j)
        for (int i = 0; i < cfg.aux_width; ++i) probe.aux(i, j) = rng.uniform();
    probe.probs = Mat<double>(cfg.actions, batch);
    for (int j = 0; j < batch; ++j) {
        double sum = 0.0;
        for (int i = 0; i < cfg.actions; ++i) {
            probe.probs(i, j) = rng.uniform() + 1e-3;
            sum += probe.probs(i, j);
        }
        probe.probs.col(j) /= sum;
    }
    auto rand_mat = [&](int r, int c) {
        Mat<double> m(r, c);
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < r; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
        return m;
    };
    probe.w.logits = rand_mat(cfg.actions, batch);
    probe.w.logits_sq = rand_mat(cfg.actions, batch);
    probe.w.value = rand_mat(1, batch);
    probe.w.value_sq = rand_mat(1, batch);
    probe.w.nre = rand_mat(1, batch);
    probe.w.nre_sq = rand_mat(1, batch);
    return probe;
}

// Zero biases leave some pre-activations exactly on the ReLU kink (dead
// channels feed exact zeros forward), where central differences straddle the
// non-differentiable point. Jitter every parameter off the kink first.
void jitter_params(PolicyNets<double>& nets, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& p : nets.params())
        for (Eigen::Index i = 0; i < p.value->size(); ++i)
            p.value->data()[i] += rng.uniform(-0.05, 0.05);
}

// Central finite differences over a deterministic sample of each parameter
// block, compared to the analytic gradient at relative tolerance 1e-4.
void check_gradients(PolicyNets<double>& nets, const GradProbe& probe, double h = 1e-4) {
    auto params = nets.params();
    zero_grads(params);
    probe.backward(nets);

    Rng pick(12345);
    for (auto& p : params) {
        const int size = static_cast<int>(p.value->size());
        const int samples = std::min(20, size);
        for (int s = 0; s < samples; ++s) {
            const int idx = pick.uniform_int(size);
            double* slot = p.value->data() + idx;
            const double saved = *slot;
            *slot = saved + h;
            const double up = probe.loss(nets, false);
            *slot = saved - h;
            const double down = probe.loss(nets, false);
            *slot = saved;
            const double fd = (up - down) / (2.0 * h);
            const double an = p.grad->data()[idx];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            INFO(p.name << "[" << idx << "] fd=" << fd << " analytic=" << an);
            REQUIRE(rel <= 1e-4);
        }
    }
}

}  // namespace

TEST_CASE("analytic gradients match finite differences on reduced networks") {
    const NetConfig cfg = reduced_config();
    PolicyNets<double> nets(cfg);
    nets.init(7);
    jitter_params(nets, 1001);
    Rng rng(91);

    SECTION("all heads combined") {
        GradProbe probe = make_probe(cfg, 3, rng);
        check_gradients(nets, probe);
    }
    SECTION("actor head only") {
        GradProbe probe = make_probe(cfg, 2, rng);
        probe.use_critic = probe.use_nre = false;
        check_gradients(nets, probe);
    }
    SECTION("critic head only") {
        GradProbe probe = make_probe(cfg, 2, rng);
        probe.use_actor = probe.use_nre = false;
        check_gradients(nets, probe);
    }
    SECTION("nre head only") {
        GradProbe probe = make_probe(cfg, 2, rng);
        probe.use_actor = probe.use_critic = false;
        check_gradients(nets, probe);
    }
}

TEST_CASE("gradients accumulate across backward calls") {
    const NetConfig cfg = reduced_config();
    PolicyNets<double> nets(cfg);
    nets.init(3);
    Rng rng(5);
    GradProbe probe = make_probe(cfg, 2, rng);

    auto params = nets.params();
    zero_grads(params);
    probe.backward(nets);
    std::vector<Mat<double>> once;
    for (auto& p : params) once.push_back(*p.grad);
    probe.backward(nets);
    for (std::size_t i = 0; i < params.size(); ++i) {
        REQUIRE((*params[i].grad - 2.0 * once[i]).template lpNorm<Eigen::Infinity>() < 1e-9);
    }
}

TEST_CASE("gradient clipping rescales to the target norm") {
    const NetConfig cfg = reduced_config();
    PolicyNets<double> nets(cfg);
    nets.init(11);
    Rng rng(6);
    GradProbe probe = make_probe(cfg, 2, rng);
    auto params = nets.params();
    zero_grads(params);
    probe.backward(nets);
    const double before = grad_norm(params);
    REQUIRE(before > 0.0);
    const double target = before / 2.0;
    clip_grad_norm(params, target);
    REQUIRE_THAT(grad_norm(params), Catch::Matchers::WithinRel(target, 1e-9));
    // clipping below the norm is a no-op
    clip_grad_norm(params, target * 10.0);
    REQUIRE_THAT(grad_norm(params), Catch::Matchers::WithinRel(target, 1e-9));
}
