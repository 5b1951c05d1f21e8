#pragma once

#include <cmath>
#include <vector>

#include "apprl/appraisal.hpp"
#include "apprl/grid.hpp"
#include "apprl/nets.hpp"
#include "apprl/shaping.hpp"

namespace apprl {

// Flat on-policy buffer. One column per transition; the trailing bootstrap
// state is kept so advantage estimation can bootstrap truncated episodes.
struct RolloutBuffer {
    int length = 0;
    Mat<float> obs;             // obs_dim x N
    std::vector<int> actions;
    std::vector<double> logprobs;        // log pi_old(a_t | s_t)
    std::vector<double> raw_rewards;     // reward received after the action
    std::vector<double> shaped_rewards;  // reshape(raw, zeta, config)
    std::vector<double> values;          // V(s_t) at collection time
    Mat<float> behavior_probs;  // actions x N, the policy output at s_t
    std::vector<AppraisalVector> appraisals;
    Mat<float> aux;             // aux_width x N, critic auxiliary input used
    std::vector<std::uint8_t> dones;

    Mat<float> final_obs;  // bootstrap state after the last transition
    Mat<float> final_aux;

    // raw returns and win flags of episodes that finished inside this rollout
    std::vector<double> episode_returns;
    std::vector<std::uint8_t> episode_wins;
};

// Steps the environment with the current policy, computing appraisals and
// reshaped rewards per step. Episodes continue across collect() calls.
class RolloutCollector {
  public:
    RolloutCollector(const GridConfig& grid, const ShapingConfig& shaping,
                     const AppraisalConfig& appraisal, std::uint64_t seed)
        : env_(grid, Rng(seed).fork(0x656e76).next_u64()),
          shaping_(shaping),
          appraisal_(appraisal),
          episode_rng_(Rng(seed).fork(0x657073)),
          sample_rng_(Rng(seed).fork(0x616374)) {
        begin_episode(true);
    }

    RolloutBuffer collect(PolicyNets<float>& nets, int length) {
        const NetConfig& net_cfg = nets.config();
        RolloutBuffer buf;
        buf.length = length;
        buf.obs.resize(net_cfg.obs_dim(), length);
        buf.actions.resize(length);
        buf.logprobs.resize(length);
        buf.raw_rewards.resize(length);
        buf.shaped_rewards.resize(length);
        buf.values.resize(length);
        buf.behavior_probs.resize(net_cfg.actions, length);
        buf.appraisals.resize(length);
        buf.aux.resize(net_cfg.aux_width, length);
        buf.dones.resize(length);

        for (int t = 0; t < length; ++t) {
            StepContext ctx = observe(nets);
            buf.obs.col(t) = ctx.obs;
            buf.behavior_probs.col(t) = ctx.probs_f;
            buf.appraisals[t] = ctx.zeta;
            if (net_cfg.aux_width > 0) buf.aux.col(t) = ctx.aux;
            buf.values[t] = ctx.value;

            // sample an action from the policy
            const double u = sample_rng_.uniform();
            int action = 0;
            double cdf = 0.0;
            for (int a = 0; a < net_cfg.actions; ++a) {
                cdf += ctx.probs[a];
                if (u < cdf || a == net_cfg.actions - 1) {
                    action = a;
                    break;
                }
            }
            buf.actions[t] = action;
            buf.logprobs[t] = std::log(std::max(ctx.probs[action], 1e-12));

            const StepOutcome out = env_.step(static_cast<Action>(action));
            buf.raw_rewards[t] = out.reward;
            buf.shaped_rewards[t] = reshape(out.reward, ctx.zeta, shaping_);
            buf.dones[t] = out.terminated ? 1 : 0;

            prev_features_ = ctx.features;
            prev_probs_ = ctx.probs_f;
            has_prev_ = true;

            if (out.terminated) {
                buf.episode_returns.push_back(out.reward);  // rewards are sparse
                buf.episode_wins.push_back(out.won ? 1 : 0);
                env_.reset(episode_rng_.next_u64());
                begin_episode(false);
            } else {
                reward_entering_state_ = out.reward;
                ++episode_step_;
            }
        }

        // bootstrap state for advantage estimation
        StepContext ctx = observe(nets);
        buf.final_obs = ctx.obs;
        buf.final_aux = ctx.aux;
        return buf;
    }

    GridWorld& env() { return env_; }

  private:
    struct StepContext {
        Mat<float> obs;       // obs_dim x 1
        Mat<float> features;  // feature_dim x 1
        Mat<float> probs_f;   // actions x 1
        std::array<double, 3> probs{};
        AppraisalVector zeta;
        Mat<float> aux;  // aux_width x 1
        double value = 0.0;
    };

    StepContext observe(PolicyNets<float>& nets) {
        StepContext ctx;
        const Observation view = env_.render_view();
        ctx.obs = Eigen::Map<const Mat<float>>(view.data.data(),
                                               static_cast<Eigen::Index>(view.data.size()), 1);
        ctx.features = nets.encode(ctx.obs);
        ctx.probs_f = softmax_columns(Mat<float>(nets.actor_logits(ctx.features)));
        for (int a = 0; a < 3; ++a) ctx.probs[a] = static_cast<double>(ctx.probs_f(a, 0));
        // renormalize the double copy so the simplex check is exact
        const double sum = ctx.probs[0] + ctx.probs[1] + ctx.probs[2];
        for (double& p : ctx.probs) p /= sum;

        const double predicted =
            has_prev_ ? static_cast<double>(nets.nre_predict(prev_features_, prev_probs_)(0, 0)) : 0.0;

        AppraisalInputs in;
        in.agent_pos = env_.state().agent_pos;
        in.goal_pos = env_.state().goal_pos;
        const auto [goal_visible, k_obst] = env_.visible_entities();
        in.goal_visible = goal_visible;
        in.k_obst = k_obst;
        in.n_obst = static_cast<int>(env_.state().obstacles.size());
        in.action_probs = ctx.probs;
        in.actual_reward = reward_entering_state_;
        in.predicted_reward = predicted;
        in.episode_step = episode_step_;
        ctx.zeta = compute_all(in, appraisal_);

        const auto aux_vec = critic_aux(shaping_, ctx.zeta, sample_rng_);
        ctx.aux.resize(static_cast<Eigen::Index>(aux_vec.size()), 1);
        for (std::size_t i = 0; i < aux_vec.size(); ++i)
            ctx.aux(static_cast<Eigen::Index>(i), 0) = static_cast<float>(aux_vec[i]);

        ctx.value = static_cast<double>(nets.critic_value(ctx.features, ctx.aux)(0, 0));
        return ctx;
    }

    void begin_episode(bool first) {
        (void)first;
        episode_step_ = 0;
        reward_entering_state_ = 0.0;
        has_prev_ = false;
    }

    GridWorld env_;
    ShapingConfig shaping_;
    AppraisalConfig appraisal_;
    Rng episode_rng_;
    Rng sample_rng_;

    int episode_step_ = 0;
    double reward_entering_state_ = 0.0;
    bool has_prev_ = false;
    Mat<float> prev_features_;
    Mat<float> prev_probs_;
};

}  // namespace apprl
