#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "apprl/appraisal.hpp"
#include "apprl/errors.hpp"
#include "apprl/grid.hpp"

namespace apprl {

inline constexpr int kNoAction = -1;

struct TraceRecord {
    int step = 0;
    Vec2 agent_pos;
    Direction agent_dir = Direction::North;
    Vec2 goal_pos;
    int action = kNoAction;   // kNoAction on the terminal record
    double reward = 0.0;      // raw reward received as a result of the action
    bool terminated = false;  // set only on the terminal record
    bool goal_visible = false;
    int k_obst = 0;
    AppraisalVector zeta;  // zeros on the terminal record
    double shaped_reward = 0.0;
};

// Per-step record stream of one episode: records 0..T-1 carry actions, the
// record at T is the single terminal record.
struct EpisodeTrace {
    std::vector<TraceRecord> records;
    bool won = false;
    int steps = 0;
    double episode_return = 0.0;

    void validate() const {
        if (records.empty()) throw std::invalid_argument("trace: no records");
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].step != static_cast<int>(i))
                throw std::invalid_argument("trace: step indices must be contiguous from 0");
            const bool last = i + 1 == records.size();
            if (records[i].terminated != last)
                throw std::invalid_argument("trace: exactly one terminal record, at the end");
            if ((records[i].action == kNoAction) != last)
                throw std::invalid_argument("trace: every non-terminal record needs an action");
        }
    }
};

// The lean interchange format for environment replay. Header is fixed; the
// full trace format extends it with appraisal columns.
inline constexpr const char* kEnvTraceHeader =
    "step,action,agent_x,agent_y,agent_dir,goal_x,goal_y,reward,terminated";
inline constexpr const char* kFullTraceHeader =
    "step,action,agent_x,agent_y,agent_dir,goal_x,goal_y,reward,terminated,"
    "goal_visible,k_obst,zeta_mr,zeta_c,zeta_n,zeta_gc,zeta_cp,zeta_a,shaped_reward";

namespace detail {

inline const char* action_name(int a) {
    if (a == kNoAction) return "none";
    return to_string(static_cast<Action>(a));
}

inline int parse_action(const std::string& s) {
    if (s == "left") return 0;
    if (s == "right") return 1;
    if (s == "forward") return 2;
    if (s == "none") return kNoAction;
    throw std::invalid_argument("trace: unknown action '" + s + "'");
}

inline Direction parse_direction(const std::string& s) {
    if (s == "N") return Direction::North;
    if (s == "E") return Direction::East;
    if (s == "S") return Direction::South;
    if (s == "W") return Direction::West;
    throw std::invalid_argument("trace: unknown direction '" + s + "'");
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline void write_prefix(std::ostream& os, const TraceRecord& r) {
    os << r.step << ',' << action_name(r.action) << ',' << r.agent_pos.x << ',' << r.agent_pos.y
       << ',' << to_string(r.agent_dir) << ',' << r.goal_pos.x << ',' << r.goal_pos.y << ','
       << fmt(r.reward) << ',' << (r.terminated ? 1 : 0);
}

}  // namespace detail

inline void write_env_trace_csv(std::ostream& os, const EpisodeTrace& trace) {
    os << kEnvTraceHeader << '\n';
    for (const auto& r : trace.records) {
        detail::write_prefix(os, r);
        os << '\n';
    }
}

inline void write_trace_csv(std::ostream& os, const EpisodeTrace& trace) {
    os << kFullTraceHeader << '\n';
    for (const auto& r : trace.records) {
        detail::write_prefix(os, r);
        os << ',' << (r.goal_visible ? 1 : 0) << ',' << r.k_obst;
        for (double z : r.zeta.as_array()) os << ',' << detail::fmt(z);
        os << ',' << detail::fmt(r.shaped_reward) << '\n';
    }
}

inline void write_trace_csv(const std::string& path, const EpisodeTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    write_trace_csv(out, trace);
}

// Reads either format; the nine replay columns are required as a prefix.
inline EpisodeTrace read_trace_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("trace: empty file");
    const std::string header = detail::split_csv(line).size() >= 17 ? kFullTraceHeader : kEnvTraceHeader;
    if (line.substr(0, std::string(kEnvTraceHeader).size()) != kEnvTraceHeader)
        throw SchemaError("trace: header does not start with the replay columns");
    const bool full = header == kFullTraceHeader;

    EpisodeTrace trace;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() < 9) throw SchemaError("trace: short row");
        TraceRecord r;
        r.step = std::stoi(f[0]);
        r.action = detail::parse_action(f[1]);
        r.agent_pos = {std::stoi(f[2]), std::stoi(f[3])};
        r.agent_dir = detail::parse_direction(f[4]);
        r.goal_pos = {std::stoi(f[5]), std::stoi(f[6])};
        r.reward = std::stod(f[7]);
        r.terminated = f[8] == "1";
        if (full && f.size() >= 18) {
            r.goal_visible = f[9] == "1";
            r.k_obst = std::stoi(f[10]);
            r.zeta.mr = std::stod(f[11]);
            r.zeta.certainty = std::stod(f[12]);
            r.zeta.novelty = std::stod(f[13]);
            r.zeta.gc = std::stod(f[14]);
            r.zeta.cp = std::stod(f[15]);
            r.zeta.anticipation = std::stod(f[16]);
            r.shaped_reward = std::stod(f[17]);
        }
        trace.records.push_back(r);
    }
    if (trace.records.empty()) throw SchemaError("trace: no records");
    trace.steps = static_cast<int>(trace.records.size()) - 1;
    double ret = 0.0;
    for (const auto& r : trace.records) ret += r.reward;
    trace.episode_return = ret;
    trace.won = trace.records.size() >= 2 && trace.records[trace.records.size() - 2].reward > 0.0;
    trace.validate();
    return trace;
}

inline EpisodeTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trace file: " + path);
    return read_trace_csv(in);
}

// Replays the recorded actions through a fresh environment and checks that
// every position, reward and termination flag matches the trace.
inline void verify_replay(const GridConfig& cfg, std::uint64_t seed, const EpisodeTrace& trace) {
    trace.validate();
    GridWorld env(cfg, seed);
    auto expect = [&](bool ok, int step, const std::string& what) {
        if (!ok)
            throw std::runtime_error("replay mismatch at step " + std::to_string(step) + ": " + what);
    };
    for (std::size_t t = 0; t + 1 < trace.records.size(); ++t) {
        const TraceRecord& rec = trace.records[t];
        expect(env.state().agent_pos == rec.agent_pos, rec.step, "agent position");
        expect(env.state().agent_dir == rec.agent_dir, rec.step, "agent direction");
        expect(env.state().goal_pos == rec.goal_pos, rec.step, "goal position");
        const StepOutcome out = env.step(static_cast<Action>(rec.action));
        expect(out.reward == rec.reward, rec.step, "reward");
        expect(out.terminated == trace.records[t + 1].terminated, rec.step, "termination");
    }
    const TraceRecord& last = trace.records.back();
    expect(env.state().agent_pos == last.agent_pos, last.step, "final agent position");
    expect(env.state().goal_pos == last.goal_pos, last.step, "final goal position");
    expect(env.terminated(), last.step, "environment terminated");
    expect(env.won() == trace.won, last.step, "win flag");
}

}  // namespace apprl
