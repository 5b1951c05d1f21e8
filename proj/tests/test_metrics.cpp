#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "apprl/metrics.hpp"

using namespace apprl;
using Catch::Matchers::WithinAbs;

namespace {

constexpr int F = static_cast<int>(Action::Forward);
constexpr int L = static_cast<int>(Action::Left);
constexpr int R = static_cast<int>(Action::Right);

// Synthetic trace builder. Every per-record vector is sized actions+1.
EpisodeTrace make_trace(const std::vector<int>& actions, bool won, double terminal_reward_value,
                        std::vector<bool> goal_visible = {},
                        std::vector<AppraisalVector> zetas = {}, std::vector<Vec2> positions = {}) {
    const int n = static_cast<int>(actions.size());
    if (goal_visible.empty()) goal_visible.assign(n + 1, false);
    if (zetas.empty()) zetas.assign(n + 1, AppraisalVector{1, 1, 1, 1, 1, 1});
    if (positions.empty()) positions.assign(n + 1, Vec2{0, 0});
    EpisodeTrace t;
    for (int i = 0; i <= n; ++i) {
        TraceRecord r;
        r.step = i;
        r.agent_pos = positions[i];
        r.goal_pos = positions[n];
        r.goal_visible = goal_visible[i];
        r.zeta = i < n ? zetas[i] : AppraisalVector{};
        r.action = i < n ? actions[i] : kNoAction;
        r.reward = i == n - 1 ? terminal_reward_value : 0.0;
        r.terminated = i == n;
        t.records.push_back(r);
    }
    t.won = won;
    t.steps = n;
    t.episode_return = terminal_reward_value;
    t.validate();
    return t;
}

// The hand-built three-episode fixture; every expected value below was
// computed independently in a spreadsheet.
std::vector<EpisodeTrace> fixture() {
    std::vector<EpisodeTrace> traces;
    // episode 1: win in 5 steps, return 0.955, one aversion, one distraction
    traces.push_back(make_trace(
        {F, L, L, F, F}, true, 0.955,
        {false, true, true, false, true, true},
        std::vector<AppraisalVector>(6, AppraisalVector{1, 1, 1, 1, 1, 1}),
        {{2, 2}, {2, 1}, {2, 1}, {2, 1}, {2, 2}, {2, 3}}));
    // episode 2: loss in 4 steps, one aversion, goal never sighted
    traces.push_back(make_trace(
        {R, R, F, R}, false, -1.0,
        {false, false, false, false, false},
        std::vector<AppraisalVector>(5, AppraisalVector{0.5, 0.5, 0.5, 0.5, 0.5, 0.5}),
        {{5, 5}, {5, 5}, {5, 5}, {5, 6}, {5, 6}}));
    // episode 3: win in 2 steps, return 0.982, goal visible throughout
    traces.push_back(make_trace(
        {F, F}, true, 0.982,
        {true, true, true},
        {AppraisalVector{0.75, 0.75, 0.75, 0.75, 0.75, 0.75},
         AppraisalVector{0.25, 0.25, 0.25, 0.25, 0.25, 0.25}, AppraisalVector{}},
        {{7, 8}, {7, 7}, {7, 6}}));
    return traces;
}

}  // namespace

TEST_CASE("aversion detection matches the pattern definition") {
    REQUIRE(detect_aversions(make_trace({L, L, F}, false, -1)) == 1);
    REQUIRE(detect_aversions(make_trace({L, R, F}, false, -1)) == 0);
    REQUIRE(detect_aversions(make_trace({R, R, F, R, R, F}, false, -1)) == 2);
    REQUIRE(detect_aversions(make_trace({R, R, R, F}, false, -1)) == 1);
    REQUIRE(detect_aversions(make_trace({F, F}, false, -1)) == 0);
}

TEST_CASE("distraction detection counts losses of sight after first contact") {
    auto flags = [](std::vector<bool> v) {
        std::vector<int> actions(v.size() - 1, F);
        return make_trace(actions, false, -1, std::move(v));
    };
    REQUIRE(detect_distractions(flags({false, false, true, true, false, true, false})) == 2);
    REQUIRE(detect_distractions(flags({false, false, false})) == 0);
    REQUIRE(detect_distractions(flags({true, true, true})) == 0);
    REQUIRE(detect_distractions(flags({false, true, false, true, false})) == 2);
}

TEST_CASE("score matches the adopted interpretation") {
    std::vector<EpisodeTrace> all_wins;
    for (int i = 0; i < 10; ++i) all_wins.push_back(make_trace({F}, true, 1.0));
    REQUIRE_THAT(score(all_wins), WithinAbs(1.0, 1e-12));

    std::vector<EpisodeTrace> all_losses;
    for (int i = 0; i < 4; ++i) all_losses.push_back(make_trace({F}, false, -1.0));
    REQUIRE_THAT(score(all_losses), WithinAbs(-1.0, 1e-12));

    // 26 wins totaling 19.6 return, 7 losses, 33 plays
    std::vector<EpisodeTrace> mixed;
    for (int i = 0; i < 26; ++i) mixed.push_back(make_trace({F}, true, 19.6 / 26.0));
    for (int i = 0; i < 7; ++i) mixed.push_back(make_trace({F}, false, -1.0));
    REQUIRE_THAT(score(mixed), WithinAbs(12.6 / 33.0, 1e-12));
    // the printed variant multiplies the return sum by the win count
    REQUIRE_THAT(score_literal(mixed), WithinAbs((26.0 * 19.6 - 7.0) / 33.0, 1e-9));

    REQUIRE_THROWS_AS(score({}), std::invalid_argument);
}

TEST_CASE("action distribution matches counting") {
    REQUIRE(action_distribution({make_trace({F, F, F}, true, 1.0)}) ==
            std::array<double, 3>{1.0, 0.0, 0.0});
    const auto d = action_distribution({make_trace({F, L, R, F}, true, 1.0)});
    REQUIRE_THAT(d[0], WithinAbs(0.5, 1e-12));
    REQUIRE_THAT(d[1], WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(d[2], WithinAbs(0.25, 1e-12));
    REQUIRE_THAT(d[0] + d[1] + d[2], WithinAbs(1.0, 1e-12));
}

TEST_CASE("roi counts one visit per record") {
    // staying put for a 5-step episode yields 6 counts in one cell
    const auto t = make_trace({L, L, L, L, L}, false, -1.0, {},
                              {}, std::vector<Vec2>(6, Vec2{0, 0}));
    const auto roi = roi_heatmap({t}, 5);
    REQUIRE(roi[0] == 6);
    long total = 0;
    for (long v : roi) total += v;
    REQUIRE(total == 6);

    REQUIRE(roi_heatmap({}, 4) == std::vector<long>(16, 0));

    auto bad = make_trace({F}, true, 1.0, {}, {}, {{0, 0}, {7, 0}});
    REQUIRE_THROWS_AS(roi_heatmap({bad}, 5), std::invalid_argument);
}

TEST_CASE("aggregate report on a single winning trace") {
    AppraisalConfig app;
    const auto t = make_trace({F, F}, true, 0.8);
    const BehaviorReport rep = aggregate_report({t}, 10, app, "demo");
    REQUIRE(rep.wins_over_plays == 1.0);
    REQUIRE_THAT(rep.average_return, WithinAbs(0.8, 1e-12));
    REQUIRE_THAT(rep.average_stress, WithinAbs(0.0, 1e-12));
    REQUIRE(rep.plays == 1);
    REQUIRE(rep.wins == 1);
}

TEST_CASE("aggregate report matches the spreadsheet fixture exactly") {
    AppraisalConfig app;
    const auto traces = fixture();
    const BehaviorReport rep = aggregate_report(traces, 10, app, "fixture");

    REQUIRE(rep.plays == 3);
    REQUIRE(rep.wins == 2);
    REQUIRE_THAT(rep.wins_over_plays, WithinAbs(2.0 / 3.0, 1e-12));
    REQUIRE_THAT(rep.average_return, WithinAbs(0.9685, 1e-12));
    REQUIRE_THAT(rep.average_stress, WithinAbs(3.0 / 11.0, 1e-12));
    REQUIRE(rep.aversions == 2);
    REQUIRE(rep.distractions == 1);
    REQUIRE_THAT(rep.forward_fraction, WithinAbs(6.0 / 11.0, 1e-12));
    REQUIRE_THAT(rep.left_fraction, WithinAbs(2.0 / 11.0, 1e-12));
    REQUIRE_THAT(rep.right_fraction, WithinAbs(3.0 / 11.0, 1e-12));
    REQUIRE_THAT(rep.forward_fraction + rep.left_fraction + rep.right_fraction,
                 WithinAbs(1.0, 1e-9));
    REQUIRE_THAT(rep.score, WithinAbs(0.937 / 3.0, 1e-12));

    // roi spot checks and conservation
    REQUIRE(rep.roi[1 * 10 + 2] == 3);
    REQUIRE(rep.roi[2 * 10 + 2] == 2);
    REQUIRE(rep.roi[5 * 10 + 5] == 3);
    REQUIRE(rep.roi[6 * 10 + 5] == 2);
    long total = 0;
    for (long v : rep.roi) total += v;
    REQUIRE(total == 14);

    // recomputation is bit-stable
    const BehaviorReport again = aggregate_report(traces, 10, app, "fixture");
    REQUIRE(to_json(rep) == to_json(again));
}

TEST_CASE("report json round-trips and validates the schema") {
    AppraisalConfig app;
    const BehaviorReport rep = aggregate_report(fixture(), 10, app, "fixture");
    const nlohmann::json j = to_json(rep);
    const BehaviorReport back = report_from_json(j);
    REQUIRE(to_json(back) == j);

    nlohmann::json bad = j;
    bad["schema_version"] = 99;
    REQUIRE_THROWS_AS(report_from_json(bad), SchemaError);
}

TEST_CASE("report csv row follows the summary-table column order") {
    AppraisalConfig app;
    const BehaviorReport rep = aggregate_report(fixture(), 10, app, "fixture");
    const std::string row = report_csv_row(rep);
    REQUIRE(row.substr(0, 8) == "fixture,");
    REQUIRE(std::string(kReportCsvHeader) ==
            "name,wins_over_plays,average_return,average_stress,aversions,forward_action,"
            "left_action,right_action,distractions,score");
}

TEST_CASE("roi pgm export is max-normalized") {
    std::vector<long> roi{0, 2, 4, 0};
    std::ostringstream os(std::ios::binary);
    write_roi_pgm(os, roi, 2);
    const std::string bytes = os.str();
    REQUIRE(bytes.substr(0, 9) == "P5\n2 2\n25");
    const std::string pixels = bytes.substr(bytes.size() - 4);
    REQUIRE(static_cast<unsigned char>(pixels[0]) == 0);
    REQUIRE(static_cast<unsigned char>(pixels[1]) == 128);
    REQUIRE(static_cast<unsigned char>(pixels[2]) == 255);
    REQUIRE(static_cast<unsigned char>(pixels[3]) == 0);
}
