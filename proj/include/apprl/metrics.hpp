#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "apprl/appraisal.hpp"
#include "apprl/errors.hpp"
#include "apprl/trace.hpp"

namespace apprl {

inline constexpr int kReportSchemaVersion = 1;

struct BehaviorReport {
    int schema_version = kReportSchemaVersion;
    std::string name;  // configuration label
    int plays = 0;
    int wins = 0;
    double wins_over_plays = 0.0;
    double average_return = 0.0;  // mean return over winning episodes
    double average_stress = 0.0;  // mean per-step stress
    long aversions = 0;
    long distractions = 0;
    double forward_fraction = 0.0;
    double left_fraction = 0.0;
    double right_fraction = 0.0;
    double score = 0.0;
    int grid_width = 0;
    std::vector<long> roi;  // row-major, index y * grid_width + x
};

// A complete turnaround (two identical consecutive turns) immediately
// followed by forward motion. Sliding-window count over the action sequence.
inline long detect_aversions(const EpisodeTrace& trace) {
    std::vector<int> actions;
    for (const auto& r : trace.records)
        if (r.action != kNoAction) actions.push_back(r.action);
    long count = 0;
    for (std::size_t i = 0; i + 2 < actions.size(); ++i) {
        const bool turn_pair = actions[i] == actions[i + 1] &&
                               (actions[i] == static_cast<int>(Action::Left) ||
                                actions[i] == static_cast<int>(Action::Right));
        if (turn_pair && actions[i + 2] == static_cast<int>(Action::Forward)) ++count;
    }
    return count;
}

// Visible -> not-visible transitions after the goal was first sighted.
inline long detect_distractions(const EpisodeTrace& trace) {
    long count = 0;
    bool seen = false;
    bool prev = false;
    for (const auto& r : trace.records) {
        if (seen && prev && !r.goal_visible) ++count;
        seen = seen || r.goal_visible;
        prev = r.goal_visible;
    }
    return count;
}

// Overall score: winning returns plus -1 per loss, averaged over all plays.
inline double score(const std::vector<EpisodeTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("score: no traces");
    double win_return_sum = 0.0;
    long losses = 0;
    for (const auto& t : traces) {
        if (t.won)
            win_return_sum += t.episode_return;
        else
            ++losses;
    }
    return (win_return_sum - static_cast<double>(losses)) / static_cast<double>(traces.size());
}

// The formula as printed, with the win count multiplying the return sum.
// Kept for comparison; see score() for the interpretation used in reports.
inline double score_literal(const std::vector<EpisodeTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("score: no traces");
    double win_return_sum = 0.0;
    long wins = 0, losses = 0;
    for (const auto& t : traces) {
        if (t.won) {
            win_return_sum += t.episode_return;
            ++wins;
        } else {
            ++losses;
        }
    }
    return (static_cast<double>(wins) * win_return_sum - static_cast<double>(losses)) /
           static_cast<double>(traces.size());
}

// Empirical (forward, left, right) frequencies over all actions.
inline std::array<double, 3> action_distribution(const std::vector<EpisodeTrace>& traces) {
    long counts[3] = {0, 0, 0};
    long total = 0;
    for (const auto& t : traces)
        for (const auto& r : t.records)
            if (r.action != kNoAction) {
                ++counts[r.action];
                ++total;
            }
    if (total == 0) throw std::invalid_argument("action_distribution: no actions");
    const double n = static_cast<double>(total);
    return {counts[static_cast<int>(Action::Forward)] / n, counts[static_cast<int>(Action::Left)] / n,
            counts[static_cast<int>(Action::Right)] / n};
}

// Visit counts per grid cell, one count per recorded step record.
inline std::vector<long> roi_heatmap(const std::vector<EpisodeTrace>& traces, int width) {
    std::vector<long> roi(width * width, 0);
    for (const auto& t : traces)
        for (const auto& r : t.records) {
            if (r.agent_pos.x < 0 || r.agent_pos.x >= width || r.agent_pos.y < 0 ||
                r.agent_pos.y >= width)
                throw std::invalid_argument("roi: trace position outside the grid");
            ++roi[r.agent_pos.y * width + r.agent_pos.x];
        }
    return roi;
}

inline BehaviorReport aggregate_report(const std::vector<EpisodeTrace>& traces, int grid_width,
                                       const AppraisalConfig& appraisal,
                                       const std::string& name = "") {
    if (traces.empty()) throw std::invalid_argument("aggregate_report: no traces");
    BehaviorReport rep;
    rep.name = name;
    rep.grid_width = grid_width;
    rep.plays = static_cast<int>(traces.size());

    double win_return_sum = 0.0;
    double stress_sum = 0.0;
    long stress_steps = 0;
    for (const auto& t : traces) {
        t.validate();
        if (t.won) {
            ++rep.wins;
            win_return_sum += t.episode_return;
        }
        for (const auto& r : t.records) {
            if (r.action == kNoAction) continue;  // appraisals stop at the last action
            stress_sum += stress(r.zeta, appraisal);
            ++stress_steps;
        }
        rep.aversions += detect_aversions(t);
        rep.distractions += detect_distractions(t);
    }
    rep.wins_over_plays = static_cast<double>(rep.wins) / rep.plays;
    rep.average_return = rep.wins > 0 ? win_return_sum / rep.wins : 0.0;
    rep.average_stress = stress_steps > 0 ? stress_sum / stress_steps : 0.0;
    const auto dist = action_distribution(traces);
    rep.forward_fraction = dist[0];
    rep.left_fraction = dist[1];
    rep.right_fraction = dist[2];
    rep.score = score(traces);
    rep.roi = roi_heatmap(traces, grid_width);
    return rep;
}

inline nlohmann::json to_json(const BehaviorReport& rep) {
    nlohmann::json roi_rows = nlohmann::json::array();
    for (int y = 0; y < rep.grid_width; ++y) {
        nlohmann::json row = nlohmann::json::array();
        for (int x = 0; x < rep.grid_width; ++x) row.push_back(rep.roi[y * rep.grid_width + x]);
        roi_rows.push_back(row);
    }
    return nlohmann::json{{"schema_version", rep.schema_version},
                          {"name", rep.name},
                          {"plays", rep.plays},
                          {"wins", rep.wins},
                          {"wins_over_plays", rep.wins_over_plays},
                          {"average_return", rep.average_return},
                          {"average_stress", rep.average_stress},
                          {"aversions", rep.aversions},
                          {"distractions", rep.distractions},
                          {"forward_fraction", rep.forward_fraction},
                          {"left_fraction", rep.left_fraction},
                          {"right_fraction", rep.right_fraction},
                          {"score", rep.score},
                          {"grid_width", rep.grid_width},
                          {"roi", roi_rows}};
}

inline BehaviorReport report_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kReportSchemaVersion)
        throw SchemaError("report: unsupported or missing schema_version");
    BehaviorReport rep;
    rep.schema_version = j["schema_version"].get<int>();
    rep.name = j["name"].get<std::string>();
    rep.plays = j["plays"].get<int>();
    rep.wins = j["wins"].get<int>();
    rep.wins_over_plays = j["wins_over_plays"].get<double>();
    rep.average_return = j["average_return"].get<double>();
    rep.average_stress = j["average_stress"].get<double>();
    rep.aversions = j["aversions"].get<long>();
    rep.distractions = j["distractions"].get<long>();
    rep.forward_fraction = j["forward_fraction"].get<double>();
    rep.left_fraction = j["left_fraction"].get<double>();
    rep.right_fraction = j["right_fraction"].get<double>();
    rep.score = j["score"].get<double>();
    rep.grid_width = j["grid_width"].get<int>();
    for (const auto& row : j["roi"])
        for (const auto& v : row) rep.roi.push_back(v.get<long>());
    if (static_cast<int>(rep.roi.size()) != rep.grid_width * rep.grid_width)
        throw SchemaError("report: roi size does not match grid width");
    return rep;
}

inline void write_report_json(const std::string& path, const BehaviorReport& rep) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << to_json(rep).dump(2) << '\n';
}

inline BehaviorReport read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read report: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("report: invalid json in " + path + ": " + e.what());
    }
    return report_from_json(j);
}

// One row per report, columns in the summary-table order plus the score.
inline constexpr const char* kReportCsvHeader =
    "name,wins_over_plays,average_return,average_stress,aversions,forward_action,left_action,"
    "right_action,distractions,score";

inline std::string report_csv_row(const BehaviorReport& rep) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%ld,%.9g,%.9g,%.9g,%ld,%.9g",
                  rep.name.c_str(), rep.wins_over_plays, rep.average_return, rep.average_stress,
                  rep.aversions, rep.forward_fraction, rep.left_fraction, rep.right_fraction,
                  rep.distractions, rep.score);
    return buf;
}

inline void write_report_csv(const std::string& path, const BehaviorReport& rep) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << kReportCsvHeader << '\n' << report_csv_row(rep) << '\n';
}

inline void write_roi_csv(const std::string& path, std::span<const long> roi, int width) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write roi: " + path);
    for (int y = 0; y < width; ++y) {
        for (int x = 0; x < width; ++x) {
            if (x) out << ',';
            out << roi[y * width + x];
        }
        out << '\n';
    }
}

// 8-bit grayscale PGM (P5), max-normalized.
inline void write_roi_pgm(std::ostream& os, std::span<const long> roi, int width) {
    long max_count = 1;
    for (long v : roi) max_count = std::max(max_count, v);
    os << "P5\n" << width << " " << width << "\n255\n";
    for (long v : roi) {
        const unsigned char byte =
            static_cast<unsigned char>(std::lround(255.0 * static_cast<double>(v) / max_count));
        os.put(static_cast<char>(byte));
    }
}

inline void write_roi_pgm(const std::string& path, std::span<const long> roi, int width) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write roi: " + path);
    write_roi_pgm(out, roi, width);
}

}  // namespace apprl
