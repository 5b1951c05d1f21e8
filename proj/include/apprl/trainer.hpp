#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <vector>

#include "apprl/errors.hpp"
#include "apprl/nets.hpp"
#include "apprl/ppo.hpp"
#include "apprl/rollout.hpp"
#include "apprl/shaping.hpp"

namespace apprl {

struct TrainConfig {
    std::uint64_t seed = 1;
    long total_timesteps = 1'000'000;
    int rollout_length = 2048;
    int minibatches = 8;
    int epochs = 4;
    double clip_coef = 0.2;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double learning_rate = 2.5e-4;
    double adam_eps = 1e-5;
    double max_grad_norm = 0.5;
    double c_policy = 1.0;
    double c_entropy = 0.01;
    double c_value = 0.5;
    double c_nre = 1.0;
    bool paper_literal = false;  // unit weight on every loss term
    GridConfig grid;
    ShapingConfig shaping = ShapingConfig::make(ShapingName::Baseline);
    NetConfig net;
    AppraisalConfig appraisal;

    // Syncs the derived fields: network input size and critic width follow
    // the grid view and the shaping mode; appraisal geometry follows the grid.
    TrainConfig resolved() const {
        TrainConfig r = *this;
        r.net.view = r.grid.view_size;
        r.net.aux_width = r.shaping.aux_width();
        r.appraisal.grid_width = r.grid.width;
        r.appraisal.view_size = r.grid.view_size;
        if (r.paper_literal) {
            r.c_policy = 1.0;
            r.c_entropy = 1.0;
            r.c_value = 1.0;
            r.c_nre = 1.0;
        }
        return r;
    }

    void validate() const {
        grid.validate();
        net.validate();
        appraisal.validate();
        if (total_timesteps < rollout_length)
            throw ConfigError("train: total_timesteps must cover at least one rollout");
        if (rollout_length <= 0 || minibatches <= 0 || epochs <= 0)
            throw ConfigError("train: rollout_length, minibatches and epochs must be positive");
        if (rollout_length % minibatches != 0)
            throw ConfigError("train: rollout_length must be divisible by the minibatch count");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must be in (0, 1]");
        if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
            throw ConfigError("train: gae_lambda must be in [0, 1]");
        if (clip_coef <= 0.0) throw ConfigError("train: clip coefficient must be positive");
        if (learning_rate <= 0.0) throw ConfigError("train: learning rate must be positive");
    }

    int iterations() const { return static_cast<int>(total_timesteps / rollout_length); }
};

struct IterationLog {
    int iteration = 0;
    long env_steps = 0;
    double mean_return = 0.0;
    double win_rate = 0.0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double nre_loss = 0.0;
    double mean_stress = 0.0;
    double learning_rate = 0.0;
};

class Trainer {
  public:
    struct LossParts {
        double policy = 0.0, value = 0.0, entropy = 0.0, nre = 0.0;

        double total(const TrainConfig& cfg) const {
            return cfg.c_policy * policy - cfg.c_entropy * entropy + cfg.c_value * value +
                   cfg.c_nre * nre;
        }
    };

    explicit Trainer(const TrainConfig& cfg)
        : cfg_(resolve_and_validate(cfg)),
          nets_(cfg_.net),
          collector_(cfg_.grid, cfg_.shaping, cfg_.appraisal, cfg_.seed),
          adam_(cfg_.adam_eps),
          update_rng_(Rng(cfg_.seed).fork(0x757064)) {
        nets_.init(cfg_.seed);
    }

    const TrainConfig& config() const { return cfg_; }
    PolicyNets<float>& nets() { return nets_; }

    // Runs the full training schedule: per iteration collect a rollout,
    // recompute advantages each epoch and take clipped-surrogate updates
    // with a linearly decayed learning rate.
    std::vector<IterationLog> train(const std::function<void(const IterationLog&)>& on_iteration = {}) {
        std::vector<IterationLog> logs;
        const int iters = cfg_.iterations();
        for (int it = 0; it < iters; ++it) {
            const double lr =
                cfg_.learning_rate * (1.0 - static_cast<double>(it) / static_cast<double>(iters));
            IterationLog log = run_iteration(it, lr);
            logs.push_back(log);
            if (on_iteration) on_iteration(log);
        }
        return logs;
    }

    IterationLog run_iteration(int iteration, double lr) {
        const RolloutBuffer buf = collector_.collect(nets_, cfg_.rollout_length);
        IterationLog log;
        log.iteration = iteration;
        log.env_steps = static_cast<long>(iteration + 1) * cfg_.rollout_length;
        log.learning_rate = lr;
        if (!buf.episode_returns.empty()) {
            log.mean_return = std::accumulate(buf.episode_returns.begin(), buf.episode_returns.end(), 0.0) /
                              static_cast<double>(buf.episode_returns.size());
            log.win_rate = std::accumulate(buf.episode_wins.begin(), buf.episode_wins.end(), 0.0) /
                           static_cast<double>(buf.episode_wins.size());
        }
        double stress_sum = 0.0;
        for (const auto& z : buf.appraisals) stress_sum += stress(z, cfg_.appraisal);
        log.mean_stress = stress_sum / static_cast<double>(buf.length);

        update(buf, lr, log, iteration);
        return log;
    }

    // One full update pass over a buffer (epochs x minibatches).
    void update(const RolloutBuffer& buf, double lr, IterationLog& log, int iteration) {
        const int n = buf.length;
        const int mb_size = n / cfg_.minibatches;
        auto params = nets_.params();

        double lp_sum = 0.0, lv_sum = 0.0, le_sum = 0.0, ln_sum = 0.0;
        int update_count = 0;

        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);

        for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
            // recompute values and advantages with the current critic
            const std::vector<double> values = evaluate_values(buf);
            const GaeResult gae =
                compute_gae(buf.shaped_rewards, values, buf.dones, cfg_.gamma, cfg_.gae_lambda);

            for (int i = n - 1; i > 0; --i) {
                const int j = update_rng_.uniform_int(i + 1);
                std::swap(perm[i], perm[j]);
            }

            for (int mb = 0; mb < cfg_.minibatches; ++mb) {
                const int* idx = perm.data() + mb * mb_size;
                zero_grads(params);
                const LossParts losses = compute_losses_and_grads(buf, gae, idx, mb_size);
                if (!std::isfinite(losses.total(cfg_))) {
                    std::ostringstream os;
                    os << "non-finite training loss at iteration " << iteration << " epoch " << epoch
                       << " minibatch " << mb << ": policy=" << losses.policy
                       << " value=" << losses.value << " entropy=" << losses.entropy
                       << " nre=" << losses.nre << " lr=" << lr << " grad_norm=" << grad_norm(params);
                    throw TrainingError(os.str());
                }
                clip_grad_norm(params, cfg_.max_grad_norm);
                adam_.step(params, lr);
                lp_sum += losses.policy;
                lv_sum += losses.value;
                le_sum += losses.entropy;
                ln_sum += losses.nre;
                ++update_count;
            }
        }
        log.policy_loss = lp_sum / update_count;
        log.value_loss = lv_sum / update_count;
        log.entropy = le_sum / update_count;
        log.nre_loss = ln_sum / update_count;
    }

    // Critic values for every buffer state plus the bootstrap state.
    std::vector<double> evaluate_values(const RolloutBuffer& buf) {
        const int n = buf.length;
        std::vector<double> values(n + 1);
        const int chunk = 256;
        for (int start = 0; start < n; start += chunk) {
            const int len = std::min(chunk, n - start);
            const Mat<float> f = nets_.encode(buf.obs.middleCols(start, len));
            const Mat<float> v = nets_.critic_value(f, buf.aux.middleCols(start, len));
            for (int i = 0; i < len; ++i) values[start + i] = static_cast<double>(v(0, i));
        }
        const Mat<float> f = nets_.encode(buf.final_obs);
        values[n] = static_cast<double>(nets_.critic_value(f, buf.final_aux)(0, 0));
        return values;
    }

    // Losses and gradient accumulation for one minibatch; no optimizer step.
    // Advantages are normalized within the minibatch.
    LossParts compute_losses_and_grads(const RolloutBuffer& buf, const GaeResult& gae, const int* idx,
                                       int mb_size) {
        const NetConfig& nc = nets_.config();
        Mat<float> obs(nc.obs_dim(), mb_size);
        Mat<float> aux(nc.aux_width, mb_size);
        Mat<float> behavior_probs(nc.actions, mb_size);
        std::vector<double> adv(mb_size);
        for (int i = 0; i < mb_size; ++i) {
            const int k = idx[i];
            obs.col(i) = buf.obs.col(k);
            if (nc.aux_width > 0) aux.col(i) = buf.aux.col(k);
            behavior_probs.col(i) = buf.behavior_probs.col(k);
            adv[i] = gae.advantages[k];
        }
        normalize_advantages(adv);

        const Mat<float> feat = nets_.encode(obs, true);
        const Mat<float> logits = nets_.actor_logits(feat, true);
        const Mat<float> probs = softmax_columns(logits);
        const Mat<float> value = nets_.critic_value(feat, aux, true);
        const Mat<float> nre_pred = nets_.nre_predict(feat, behavior_probs, true);

        LossParts losses;
        Mat<float> dlogits = Mat<float>::Zero(nc.actions, mb_size);
        Mat<float> dvalue(1, mb_size);
        Mat<float> dnre(1, mb_size);
        const double inv_b = 1.0 / static_cast<double>(mb_size);

        for (int i = 0; i < mb_size; ++i) {
            const int k = idx[i];
            const int a = buf.actions[k];
            const double p_a = std::max(static_cast<double>(probs(a, i)), 1e-12);
            const double ratio = std::exp(std::log(p_a) - buf.logprobs[k]);

            losses.policy -= clipped_surrogate(ratio, adv[i], cfg_.clip_coef) * inv_b;
            const double gate = clipped_surrogate_dratio(ratio, adv[i], cfg_.clip_coef);

            double entropy = 0.0;
            for (int j = 0; j < nc.actions; ++j) {
                const double p = std::max(static_cast<double>(probs(j, i)), 1e-12);
                entropy -= p * std::log(p);
            }
            losses.entropy += entropy * inv_b;

            for (int j = 0; j < nc.actions; ++j) {
                const double p = static_cast<double>(probs(j, i));
                const double indicator = j == a ? 1.0 : 0.0;
                const double dsurr = gate * ratio * (indicator - p);
                const double dent = -p * (std::log(std::max(p, 1e-12)) + entropy);
                dlogits(j, i) = static_cast<float>(-cfg_.c_policy * inv_b * dsurr -
                                                   cfg_.c_entropy * inv_b * dent);
            }

            const double v = static_cast<double>(value(0, i));
            const double target = gae.returns[k];
            losses.value += (v - target) * (v - target) * inv_b;
            dvalue(0, i) = static_cast<float>(cfg_.c_value * 2.0 * (v - target) * inv_b);

            const double pred = static_cast<double>(nre_pred(0, i));
            const double reward = buf.raw_rewards[k];
            losses.nre += (pred - reward) * (pred - reward) * inv_b;
            dnre(0, i) = static_cast<float>(cfg_.c_nre * 2.0 * (pred - reward) * inv_b);
        }

        Mat<float> dfeat = nets_.actor_backward(dlogits);
        dfeat += nets_.critic_backward(dvalue);
        dfeat += nets_.nre_backward(dnre);
        nets_.encoder_backward(dfeat);
        return losses;
    }

  private:
    static TrainConfig resolve_and_validate(const TrainConfig& cfg) {
        TrainConfig r = cfg.resolved();
        r.validate();
        return r;
    }

    TrainConfig cfg_;
    PolicyNets<float> nets_;
    RolloutCollector collector_;
    Adam<float> adam_;
    Rng update_rng_;
};

// Columns of the per-iteration training log CSV.
inline constexpr const char* kTrainingLogHeader =
    "iteration,env_steps,mean_return,win_rate,policy_loss,value_loss,entropy,nre_loss,mean_stress,"
    "learning_rate";

inline std::string format_log_row(const IterationLog& log) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", log.iteration,
                  log.env_steps, log.mean_return, log.win_rate, log.policy_loss, log.value_loss,
                  log.entropy, log.nre_loss, log.mean_stress, log.learning_rate);
    return buf;
}

}  // namespace apprl
