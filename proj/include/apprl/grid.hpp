#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "apprl/errors.hpp"
#include "apprl/rng.hpp"

namespace apprl {

enum class CellKind : int { Empty = 0, Wall = 1, Obstacle = 2, Goal = 3, Agent = 4 };

enum class Action : int { Left = 0, Right = 1, Forward = 2 };

enum class Direction : int { North = 0, East = 1, South = 2, West = 3 };

inline const char* to_string(Action a) {
    switch (a) {
        case Action::Left: return "left";
        case Action::Right: return "right";
        default: return "forward";
    }
}

inline const char* to_string(Direction d) {
    switch (d) {
        case Direction::North: return "N";
        case Direction::East: return "E";
        case Direction::South: return "S";
        default: return "W";
    }
}

struct Vec2 {
    int x = 0;
    int y = 0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
};

// x grows east, y grows south.
inline Vec2 forward_of(Direction d) {
    switch (d) {
        case Direction::North: return {0, -1};
        case Direction::East: return {1, 0};
        case Direction::South: return {0, 1};
        default: return {-1, 0};
    }
}

inline Direction rotate_right(Direction d) { return static_cast<Direction>((static_cast<int>(d) + 1) % 4); }
inline Direction rotate_left(Direction d) { return static_cast<Direction>((static_cast<int>(d) + 3) % 4); }
inline Vec2 right_of(Direction d) { return forward_of(rotate_right(d)); }

struct GridConfig {
    int width = 10;
    int view_size = 7;
    int n_obstacles = 3;
    int max_steps = 100;
    bool dynamic_obstacles = true;
    bool moving_goal = false;
    int goal_move_period = 4;
    bool dynamic_walls = false;
    int wall_shift_period = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (width < 2) throw ConfigError("grid width must be at least 2");
        if (view_size % 2 == 0) throw ConfigError("view size must be odd");
        if (view_size < 1 || view_size > width) throw ConfigError("view size must be in [1, width]");
        if (n_obstacles < 0 || n_obstacles >= width * width - 2)
            throw ConfigError("too many obstacles for the grid");
        if (max_steps <= 0) throw ConfigError("max_steps must be positive");
        if (moving_goal && goal_move_period <= 0) throw ConfigError("goal_move_period must be positive");
        if (dynamic_walls && wall_shift_period <= 0) throw ConfigError("wall_shift_period must be positive");
    }
};

// Named presets addressable from the CLI.
inline GridConfig grid_preset(const std::string& name) {
    GridConfig cfg;
    if (name == "gw-a-train") {
        cfg.n_obstacles = 3;
        cfg.dynamic_obstacles = true;
        cfg.moving_goal = false;
        cfg.max_steps = 100;
    } else if (name == "gw-a-test") {
        cfg.n_obstacles = 5;
        cfg.dynamic_obstacles = true;
        cfg.moving_goal = true;
        cfg.goal_move_period = 4;
        cfg.max_steps = 100;
    } else if (name == "gw-b") {
        cfg.n_obstacles = 7;
        cfg.dynamic_obstacles = true;
        cfg.moving_goal = true;
        cfg.goal_move_period = 4;
        cfg.max_steps = 400;
        cfg.dynamic_walls = true;
        cfg.wall_shift_period = 50;
    } else {
        throw ConfigError("unknown environment preset '" + name +
                          "' (valid: gw-a-train, gw-a-test, gw-b, custom)");
    }
    return cfg;
}

struct GridState {
    Vec2 agent_pos;
    Direction agent_dir = Direction::North;
    Vec2 goal_pos;
    std::vector<Vec2> obstacles;
    std::vector<std::uint8_t> walls;  // width*width bitmap, index y*w+x
    int step_count = 0;
    bool terminated = false;
    bool won = false;
    Rng rng;

    friend bool operator==(const GridState& a, const GridState& b) {
        return a.agent_pos == b.agent_pos && a.agent_dir == b.agent_dir && a.goal_pos == b.goal_pos &&
               a.obstacles == b.obstacles && a.walls == b.walls && a.step_count == b.step_count &&
               a.terminated == b.terminated && a.won == b.won;
    }
};

// Egocentric n x n x 3 view. Channel 0 holds CellKind/4, channel 1 flags
// dynamic entities, channel 2 is reserved. Stored channel-major.
struct Observation {
    int n = 0;
    std::vector<float> data;  // [channel][row][col]

    float at(int row, int col, int channel) const { return data[channel * n * n + row * n + col]; }
    float& at(int row, int col, int channel) { return data[channel * n * n + row * n + col]; }

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepInfo {
    bool goal_visible = false;
    int k_obst = 0;
    int steps = 0;
};

struct StepOutcome {
    Observation observation;
    double reward = 0.0;
    bool terminated = false;
    bool won = false;
    StepInfo info;
};

// Win reward shrinks linearly with the number of steps used; any loss is -1.
inline double terminal_reward(int steps, int max_steps, bool won) {
    if (!won) return -1.0;
    return 1.0 - 0.9 * static_cast<double>(steps) / static_cast<double>(max_steps);
}

class GridWorld {
  public:
    explicit GridWorld(const GridConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        reset(cfg_.seed);
    }

    GridWorld(const GridConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        reset(seed);
    }

    // Adopts an explicit state, e.g. for hand-built layouts.
    GridWorld(const GridConfig& cfg, GridState state) : cfg_(cfg), state_(std::move(state)) {
        cfg_.validate();
        if (state_.walls.empty()) state_.walls.assign(cfg_.width * cfg_.width, 0);
    }

    // Samples a fresh layout. Identical (config, seed) gives identical state.
    Observation reset(std::uint64_t seed) {
        state_ = GridState{};
        state_.rng = Rng(seed);
        state_.walls.assign(cfg_.width * cfg_.width, 0);

        for (int attempt = 0; attempt < 100; ++attempt) {
            if (cfg_.dynamic_walls) {
                state_.walls = sample_walls(state_.rng, {});
            }
            if (place_entities() && (!cfg_.dynamic_walls || connected(state_.agent_pos, state_.goal_pos))) {
                return render_view();
            }
        }
        throw ConfigError("could not sample a valid layout for this grid configuration");
    }

    StepOutcome step(Action action) {
        if (state_.terminated) throw std::logic_error("step() called on a terminated episode");

        bool won = false;
        bool lost = false;
        switch (action) {
            case Action::Left:
                state_.agent_dir = rotate_left(state_.agent_dir);
                break;
            case Action::Right:
                state_.agent_dir = rotate_right(state_.agent_dir);
                break;
            case Action::Forward: {
                const Vec2 target = state_.agent_pos + forward_of(state_.agent_dir);
                if (!in_grid(target) || wall_at(target)) {
                    // blocked: no-op move, the step still counts
                } else if (target == state_.goal_pos) {
                    state_.agent_pos = target;
                    won = true;
                } else if (obstacle_at(target)) {
                    lost = true;
                } else {
                    state_.agent_pos = target;
                }
                break;
            }
        }
        ++state_.step_count;

        if (!won && !lost) {
            if (cfg_.dynamic_obstacles) lost = move_obstacles();
            if (!lost && cfg_.moving_goal && state_.step_count % cfg_.goal_move_period == 0) move_goal();
            if (!lost && cfg_.dynamic_walls && state_.step_count % cfg_.wall_shift_period == 0) shift_walls();
            if (!lost && state_.step_count >= cfg_.max_steps) lost = true;
        }

        StepOutcome out;
        out.terminated = won || lost;
        out.won = won;
        out.reward = out.terminated ? terminal_reward(state_.step_count, cfg_.max_steps, won) : 0.0;
        state_.terminated = out.terminated;
        state_.won = won;
        out.observation = render_view();
        const auto [gv, ko] = visible_entities();
        out.info = {gv, ko, state_.step_count};
        return out;
    }

    // Egocentric window with the agent at the bottom-center facing up.
    Observation render_view() const {
        const int n = cfg_.view_size;
        Observation obs;
        obs.n = n;
        obs.data.assign(3 * n * n, 0.0f);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const Vec2 p = view_to_world(r, c);
                const CellKind kind = kind_at(p);
                obs.at(r, c, 0) = static_cast<float>(kind) / 4.0f;
                // Movable entity kinds (obstacles, the goal) are flagged by
                // kind, not by the per-config toggles: policies must see the
                // same encoding whether or not a particular run moves them.
                const bool dyn = kind == CellKind::Obstacle || kind == CellKind::Goal;
                obs.at(r, c, 1) = dyn ? 1.0f : 0.0f;
            }
        }
        return obs;
    }

    // Goal visibility and visible-obstacle count over the current window.
    std::pair<bool, int> visible_entities() const {
        const int n = cfg_.view_size;
        bool goal_visible = false;
        int k_obst = 0;
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const Vec2 p = view_to_world(r, c);
                if (!in_grid(p)) continue;
                if (p == state_.goal_pos) goal_visible = true;
                if (obstacle_at(p)) ++k_obst;
            }
        }
        return {goal_visible, k_obst};
    }

    Vec2 view_to_world(int row, int col) const {
        const int n = cfg_.view_size;
        const int ahead = (n - 1) - row;
        const int lateral = col - (n - 1) / 2;
        const Vec2 f = forward_of(state_.agent_dir);
        const Vec2 r = right_of(state_.agent_dir);
        return {state_.agent_pos.x + ahead * f.x + lateral * r.x,
                state_.agent_pos.y + ahead * f.y + lateral * r.y};
    }

    CellKind kind_at(Vec2 p) const {
        if (!in_grid(p)) return CellKind::Wall;
        if (p == state_.agent_pos) return CellKind::Agent;
        if (p == state_.goal_pos) return CellKind::Goal;
        if (obstacle_at(p)) return CellKind::Obstacle;
        if (wall_at(p)) return CellKind::Wall;
        return CellKind::Empty;
    }

    bool in_grid(Vec2 p) const { return p.x >= 0 && p.x < cfg_.width && p.y >= 0 && p.y < cfg_.width; }
    bool wall_at(Vec2 p) const { return state_.walls[p.y * cfg_.width + p.x] != 0; }
    bool obstacle_at(Vec2 p) const {
        return std::find(state_.obstacles.begin(), state_.obstacles.end(), p) != state_.obstacles.end();
    }

    const GridState& state() const { return state_; }
    const GridConfig& config() const { return cfg_; }
    bool terminated() const { return state_.terminated; }
    bool won() const { return state_.won; }

  private:
    bool place_entities() {
        std::vector<Vec2> free;
        free.reserve(cfg_.width * cfg_.width);
        for (int y = 0; y < cfg_.width; ++y)
            for (int x = 0; x < cfg_.width; ++x)
                if (!state_.walls[y * cfg_.width + x]) free.push_back({x, y});
        if (static_cast<int>(free.size()) < cfg_.n_obstacles + 2) return false;

        auto take = [&](int idx) {
            const Vec2 p = free[idx];
            free[idx] = free.back();
            free.pop_back();
            return p;
        };
        state_.goal_pos = take(state_.rng.uniform_int(static_cast<int>(free.size())));
        state_.agent_pos = take(state_.rng.uniform_int(static_cast<int>(free.size())));
        state_.agent_dir = static_cast<Direction>(state_.rng.uniform_int(4));
        state_.obstacles.clear();
        for (int i = 0; i < cfg_.n_obstacles; ++i)
            state_.obstacles.push_back(take(state_.rng.uniform_int(static_cast<int>(free.size()))));
        return true;
    }

    // Each obstacle attempts one uniform move to a free orthogonal neighbor.
    // Moving onto the agent captures it and ends the episode.
    bool move_obstacles() {
        for (auto& obst : state_.obstacles) {
            Vec2 candidates[4];
            int count = 0;
            for (Direction d : {Direction::North, Direction::East, Direction::South, Direction::West}) {
                const Vec2 p = obst + forward_of(d);
                if (!in_grid(p) || wall_at(p) || obstacle_at(p) || p == state_.goal_pos) continue;
                candidates[count++] = p;
            }
            if (count == 0) continue;
            obst = candidates[state_.rng.uniform_int(count)];
            if (obst == state_.agent_pos) return true;
        }
        return false;
    }

    // The goal random-walks one cell, never onto walls, obstacles or the agent.
    void move_goal() {
        Vec2 candidates[4];
        int count = 0;
        for (Direction d : {Direction::North, Direction::East, Direction::South, Direction::West}) {
            const Vec2 p = state_.goal_pos + forward_of(d);
            if (!in_grid(p) || wall_at(p) || obstacle_at(p) || p == state_.agent_pos) continue;
            candidates[count++] = p;
        }
        if (count > 0) state_.goal_pos = candidates[state_.rng.uniform_int(count)];
    }

    // Re-samples maze segments, keeping agent/goal/obstacles clear and the
    // goal reachable. Keeps the old walls if no valid sample is found.
    void shift_walls() {
        std::vector<Vec2> occupied = state_.obstacles;
        occupied.push_back(state_.agent_pos);
        occupied.push_back(state_.goal_pos);
        for (int attempt = 0; attempt < 20; ++attempt) {
            auto walls = sample_walls(state_.rng, occupied);
            std::swap(state_.walls, walls);
            if (connected(state_.agent_pos, state_.goal_pos)) return;
            std::swap(state_.walls, walls);
        }
    }

    // Maze-like layout: a handful of straight segments with one gap carved
    // into each so corridors stay passable.
    std::vector<std::uint8_t> sample_walls(Rng& rng, const std::vector<Vec2>& avoid) const {
        const int w = cfg_.width;
        std::vector<std::uint8_t> walls(w * w, 0);
        const int segments = w / 2;
        for (int s = 0; s < segments; ++s) {
            const bool horizontal = rng.uniform_int(2) == 0;
            const int line = 1 + rng.uniform_int(w - 2);
            const int len = 3 + rng.uniform_int(std::max(1, w / 2 - 1));
            const int start = rng.uniform_int(std::max(1, w - len + 1));
            const int gap = start + rng.uniform_int(len);
            for (int i = start; i < std::min(w, start + len); ++i) {
                if (i == gap) continue;
                const Vec2 p = horizontal ? Vec2{i, line} : Vec2{line, i};
                if (std::find(avoid.begin(), avoid.end(), p) != avoid.end()) continue;
                walls[p.y * w + p.x] = 1;
            }
        }
        return walls;
    }

    // Flood fill over non-wall cells.
    bool connected(Vec2 from, Vec2 to) const {
        const int w = cfg_.width;
        std::vector<std::uint8_t> seen(w * w, 0);
        std::vector<Vec2> stack{from};
        seen[from.y * w + from.x] = 1;
        while (!stack.empty()) {
            const Vec2 p = stack.back();
            stack.pop_back();
            if (p == to) return true;
            for (Direction d : {Direction::North, Direction::East, Direction::South, Direction::West}) {
                const Vec2 q = p + forward_of(d);
                if (!in_grid(q) || wall_at(q) || seen[q.y * w + q.x]) continue;
                seen[q.y * w + q.x] = 1;
                stack.push_back(q);
            }
        }
        return false;
    }

    GridConfig cfg_;
    GridState state_;
};

}  // namespace apprl
