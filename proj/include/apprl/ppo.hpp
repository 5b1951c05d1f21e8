#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace apprl {

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;  // advantage + value, the critic regression target
};

// Generalized advantage estimation over a flat buffer. `values` carries one
// extra trailing entry: the bootstrap value of the state after the last
// transition (ignored when that transition is done). Accumulation truncates
// at episode boundaries.
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             std::span<const std::uint8_t> dones, double gamma, double lambda) {
    const std::size_t n = rewards.size();
    if (values.size() != n + 1 || dones.size() != n)
        throw std::invalid_argument("compute_gae: inconsistent buffer lengths");
    GaeResult out;
    out.advantages.resize(n);
    out.returns.resize(n);
    double acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double delta = rewards[i] + gamma * values[i + 1] * not_done - values[i];
        acc = delta + gamma * lambda * not_done * acc;
        out.advantages[i] = acc;
        out.returns[i] = acc + values[i];
    }
    return out;
}

// Monte-Carlo advantage on a single terminated episode: discounted
// reward-to-go minus the value estimate. Equals GAE at lambda = 1.
inline std::vector<double> monte_carlo_advantage(std::span<const double> rewards,
                                                 std::span<const double> values, double gamma) {
    std::vector<double> adv(rewards.size());
    double suffix = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        suffix = rewards[i] + gamma * suffix;
        adv[i] = suffix - values[i];
    }
    return adv;
}

// Per-sample clipped surrogate objective.
inline double clipped_surrogate(double ratio, double advantage, double clip) {
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    return std::min(ratio * advantage, clipped * advantage);
}

// Gradient of the surrogate w.r.t. the ratio: zero once the clipped branch
// is active (the standard conservative-update rule).
inline double clipped_surrogate_dratio(double ratio, double advantage, double clip) {
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

// Policy loss: negative mean surrogate over the batch.
inline double policy_loss(std::span<const double> ratios, std::span<const double> advantages,
                          double clip) {
    if (ratios.size() != advantages.size() || ratios.empty())
        throw std::invalid_argument("policy_loss: bad batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i)
        sum += clipped_surrogate(ratios[i], advantages[i], clip);
    return -sum / static_cast<double>(ratios.size());
}

// Mean squared error between value predictions and return targets.
inline double value_loss(std::span<const double> values, std::span<const double> targets) {
    if (values.size() != targets.size() || values.empty())
        throw std::invalid_argument("value_loss: bad batch");
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - targets[i];
        sum += d * d;
    }
    return sum / static_cast<double>(values.size());
}

// In-place normalization to zero mean, unit variance.
inline void normalize_advantages(std::span<double> adv) {
    if (adv.size() < 2) return;
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    const double denom = std::sqrt(var) + 1e-8;
    for (double& a : adv) a = (a - mean) / denom;
}

}  // namespace apprl
