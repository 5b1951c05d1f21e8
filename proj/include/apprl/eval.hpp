#pragma once

#include <thread>
#include <vector>

#include "apprl/nets.hpp"
#include "apprl/shaping.hpp"
#include "apprl/trace.hpp"

namespace apprl {

struct EvalConfig {
    GridConfig grid;
    ShapingConfig shaping = ShapingConfig::make(ShapingName::Baseline);
    AppraisalConfig appraisal;
    int episodes = 100;
    std::uint64_t base_seed = 1;
    bool stochastic = false;  // sample from the policy instead of argmax
    int threads = 1;

    EvalConfig resolved() const {
        EvalConfig r = *this;
        r.appraisal.grid_width = r.grid.width;
        r.appraisal.view_size = r.grid.view_size;
        return r;
    }
};

struct EvalResult {
    std::vector<EpisodeTrace> traces;
    std::vector<std::uint64_t> seeds;  // per-episode environment seeds
};

// Rolls one evaluation episode and records the full trace. Deterministic in
// (nets, configs, env_seed, policy_seed).
inline EpisodeTrace run_episode(PolicyNets<float>& nets, const GridConfig& grid,
                                const ShapingConfig& shaping, const AppraisalConfig& appraisal,
                                std::uint64_t env_seed, bool stochastic = false,
                                std::uint64_t policy_seed = 0) {
    GridWorld env(grid, env_seed);
    Rng policy_rng = Rng(policy_seed).fork(0x706f6c);
    EpisodeTrace trace;

    Mat<float> prev_features, prev_probs;
    bool has_prev = false;
    double reward_entering_state = 0.0;
    int step = 0;

    auto make_record = [&](const AppraisalVector& zeta, bool goal_visible, int k_obst) {
        TraceRecord rec;
        rec.step = step;
        rec.agent_pos = env.state().agent_pos;
        rec.agent_dir = env.state().agent_dir;
        rec.goal_pos = env.state().goal_pos;
        rec.goal_visible = goal_visible;
        rec.k_obst = k_obst;
        rec.zeta = zeta;
        return rec;
    };

    while (!env.terminated()) {
        const Observation view = env.render_view();
        const Mat<float> obs = Eigen::Map<const Mat<float>>(
            view.data.data(), static_cast<Eigen::Index>(view.data.size()), 1);
        const Mat<float> features = nets.encode(obs);
        const Mat<float> probs_f = softmax_columns(Mat<float>(nets.actor_logits(features)));
        std::array<double, 3> probs{};
        double sum = 0.0;
        for (int a = 0; a < 3; ++a) sum += probs_f(a, 0);
        for (int a = 0; a < 3; ++a) probs[a] = static_cast<double>(probs_f(a, 0)) / sum;

        const double predicted =
            has_prev ? static_cast<double>(nets.nre_predict(prev_features, prev_probs)(0, 0)) : 0.0;

        AppraisalInputs in;
        in.agent_pos = env.state().agent_pos;
        in.goal_pos = env.state().goal_pos;
        const auto [goal_visible, k_obst] = env.visible_entities();
        in.goal_visible = goal_visible;
        in.k_obst = k_obst;
        in.n_obst = static_cast<int>(env.state().obstacles.size());
        in.action_probs = probs;
        in.actual_reward = reward_entering_state;
        in.predicted_reward = predicted;
        in.episode_step = step;
        const AppraisalVector zeta = compute_all(in, appraisal);

        int action = 0;
        if (stochastic) {
            const double u = policy_rng.uniform();
            double cdf = 0.0;
            for (int a = 0; a < 3; ++a) {
                cdf += probs[a];
                if (u < cdf || a == 2) {
                    action = a;
                    break;
                }
            }
        } else {
            for (int a = 1; a < 3; ++a)
                if (probs[a] > probs[action]) action = a;
        }

        TraceRecord rec = make_record(zeta, goal_visible, k_obst);
        rec.action = action;
        const StepOutcome out = env.step(static_cast<Action>(action));
        rec.reward = out.reward;
        rec.shaped_reward = reshape(out.reward, zeta, shaping);
        trace.records.push_back(rec);

        prev_features = features;
        prev_probs = probs_f;
        has_prev = true;
        reward_entering_state = out.reward;
        ++step;
    }

    // single terminal record; appraisals are not defined past the last action
    const auto [goal_visible, k_obst] = env.visible_entities();
    TraceRecord rec = make_record(AppraisalVector{}, goal_visible, k_obst);
    rec.terminated = true;
    trace.records.push_back(rec);

    trace.won = env.won();
    trace.steps = step;
    trace.episode_return = trace.records[trace.records.size() - 2].reward;
    trace.validate();
    return trace;
}

// Evaluates N episodes with per-episode seeds. Episodes may run in parallel;
// the seed-indexed merge keeps results independent of scheduling.
inline EvalResult evaluate(const PolicyNets<float>& nets, const EvalConfig& config) {
    const EvalConfig cfg = config.resolved();
    EvalResult result;
    result.seeds.resize(cfg.episodes);
    result.traces.resize(cfg.episodes);
    Rng seed_rng = Rng(cfg.base_seed).fork(0x6576616c);
    for (int i = 0; i < cfg.episodes; ++i) result.seeds[i] = seed_rng.next_u64();

    const int n_threads = std::max(1, std::min(cfg.threads, cfg.episodes));
    auto work = [&](int tid) {
        PolicyNets<float> local = nets;  // forward passes stay thread-local
        for (int i = tid; i < cfg.episodes; i += n_threads) {
            result.traces[i] = run_episode(local, cfg.grid, cfg.shaping, cfg.appraisal,
                                           result.seeds[i], cfg.stochastic, result.seeds[i]);
        }
    };
    if (n_threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    return result;
}

}  // namespace apprl
