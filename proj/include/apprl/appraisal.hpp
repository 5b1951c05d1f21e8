#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <span>
#include <stdexcept>

#include "apprl/grid.hpp"

namespace apprl {

// Six unit-interval appraisals, ordered: motivational relevance, certainty,
// novelty, goal congruence, coping potential, anticipation.
struct AppraisalVector {
    double mr = 0.0;
    double certainty = 0.0;
    double novelty = 0.0;
    double gc = 0.0;
    double cp = 0.0;
    double anticipation = 0.0;

    std::array<double, 6> as_array() const { return {mr, certainty, novelty, gc, cp, anticipation}; }

    friend bool operator==(const AppraisalVector&, const AppraisalVector&) = default;
};

inline constexpr std::array<double, 6> kDefaultStressWeights = {0.25, 0.05, 0.1, 0.2, 0.35, 0.05};
inline constexpr double kNeutralAnticipation = 0.5;

struct AppraisalConfig {
    int grid_width = 10;
    int view_size = 7;
    double epsilon = 1e-6;
    std::array<double, 6> stress_weights = kDefaultStressWeights;

    void validate() const {
        double sum = 0.0;
        for (double w : stress_weights) {
            if (w < 0.0) throw std::invalid_argument("stress weights must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("stress weights must sum to 1");
        if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    }
};

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

namespace detail {
inline void check_simplex(std::span<const double> probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("action probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("action probabilities must sum to 1");
}
}  // namespace detail

// Complement of the agent-goal Manhattan distance, normalized by the grid size.
inline double motivational_relevance(Vec2 agent, Vec2 goal, int grid_width) {
    const int manhattan = std::abs(agent.x - goal.x) + std::abs(agent.y - goal.y);
    return clamp01(1.0 - static_cast<double>(manhattan - 1) / (2.0 * (grid_width - 1)));
}

// Complement of the normalized policy entropy. Exact zeros contribute no
// entropy, so a deterministic distribution maps to exactly 1.
inline double certainty(std::span<const double> action_probs, double epsilon = 1e-6) {
    detail::check_simplex(action_probs);
    double entropy = 0.0;
    for (double p : action_probs) {
        if (p > 0.0) entropy -= p * std::log(std::max(p, epsilon));
    }
    return 1.0 - entropy / (1.0 + entropy);
}

// Normalized KL divergence from the uniform distribution to the policy.
inline double novelty(std::span<const double> action_probs, double epsilon = 1e-6) {
    detail::check_simplex(action_probs);
    const double q = 1.0 / static_cast<double>(action_probs.size());
    double kl = 0.0;
    for (double p : action_probs) kl += q * std::log(q / std::max(p, epsilon));
    kl = std::max(kl, 0.0);
    return kl / (1.0 + kl);
}

// Visibility-gated complement of the agent-goal Euclidean distance.
inline double goal_congruence(Vec2 agent, Vec2 goal, bool goal_visible, int view_size) {
    if (!goal_visible) return 0.0;
    const double dx = agent.x - goal.x;
    const double dy = agent.y - goal.y;
    const double half = (view_size - 1) / 2;
    const double denom = std::sqrt(half * half + static_cast<double>(view_size) * view_size);
    return clamp01(1.0 - std::sqrt(dx * dx + dy * dy) / denom);
}

// Complement of the visible-obstacle ratio.
inline double coping_potential(int k_obst, int n_obst, double epsilon = 1e-6) {
    if (k_obst < 0 || k_obst > n_obst) throw std::invalid_argument("k_obst must be in [0, n_obst]");
    return 1.0 - static_cast<double>(k_obst) / (static_cast<double>(n_obst) + epsilon);
}

// Complement of the next-reward prediction error. Callers with no previous
// observation (episode step 0) should use kNeutralAnticipation instead.
inline double anticipation(double actual_reward, double predicted_reward) {
    return clamp01(1.0 - std::abs(actual_reward - predicted_reward));
}

struct AppraisalInputs {
    Vec2 agent_pos;
    Vec2 goal_pos;
    bool goal_visible = false;
    int k_obst = 0;
    int n_obst = 0;
    std::array<double, 3> action_probs{};
    double actual_reward = 0.0;
    double predicted_reward = 0.0;
    int episode_step = 0;  // 0 means no previous observation exists
};

inline AppraisalVector compute_all(const AppraisalInputs& in, const AppraisalConfig& cfg) {
    AppraisalVector z;
    z.mr = motivational_relevance(in.agent_pos, in.goal_pos, cfg.grid_width);
    z.certainty = certainty(in.action_probs, cfg.epsilon);
    z.novelty = novelty(in.action_probs, cfg.epsilon);
    z.gc = goal_congruence(in.agent_pos, in.goal_pos, in.goal_visible, cfg.view_size);
    z.cp = coping_potential(in.k_obst, in.n_obst, cfg.epsilon);
    z.anticipation = in.episode_step == 0 ? kNeutralAnticipation
                                          : anticipation(in.actual_reward, in.predicted_reward);
    return z;
}

// Weighted sum of appraisal complements.
inline double stress(const AppraisalVector& z, std::span<const double, 6> weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw std::invalid_argument("stress weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("stress weights must sum to 1");
    const auto zs = z.as_array();
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += (1.0 - zs[i]) * weights[i];
    return s;
}

inline double stress(const AppraisalVector& z, const AppraisalConfig& cfg) {
    return stress(z, std::span<const double, 6>(cfg.stress_weights));
}

}  // namespace apprl
