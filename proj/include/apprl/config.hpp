#include <algorithm>
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "apprl/errors.hpp"
#include "apprl/eval.hpp"
#include "apprl/grid.hpp"
#include "apprl/trainer.hpp"

namespace apprl {

// Flat key = value sections, TOML style. Comments start with # or ;.
class IniDoc {
  public:
    static IniDoc parse(std::istream& is, const std::string& origin = "<stream>") {
        IniDoc doc;
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const std::string text = strip(line);
            if (text.empty() || text[0] == '#' || text[0] == ';') continue;
            if (text.front() == '[') {
                if (text.back() != ']')
                    throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
                section = strip(text.substr(1, text.size() - 2));
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = strip(text.substr(0, eq));
            const std::string value = strip(text.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            doc.values_[section + "." + key] = value;
        }
        return doc;
    }

    static IniDoc parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file: " + path);
        return parse(in, path);
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) > 0;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string get_string(const std::string& section, const std::string& key,
                           std::string fallback) const {
        const auto it = values_.find(section + "." + key);
        return it == values_.end() ? fallback : it->second;
    }

    long get_int(const std::string& section, const std::string& key, long fallback) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (...) {
            throw ConfigError("config: " + section + "." + key + " must be an integer, got '" +
                              it->second + "'");
        }
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            return std::stoull(it->second);
        } catch (...) {
            throw ConfigError("config: " + section + "." + key + " must be a non-negative integer");
        }
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw ConfigError("config: " + section + "." + key + " must be a number, got '" +
                              it->second + "'");
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("config: " + section + "." + key + " must be true or false");
    }

    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    std::vector<double> fallback) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                out.push_back(std::stod(strip(item)));
            } catch (...) {
                throw ConfigError("config: " + section + "." + key + " must be a comma list of numbers");
            }
        }
        return out;
    }

  private:
    static std::string strip(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

// Everything one experiment needs: environment, shaping, training and
// evaluation settings. CLI flags override file values.
struct ExperimentConfig {
    std::string env_preset = "gw-a-train";  // preset name or "custom"
    GridConfig grid = grid_preset("gw-a-train");
    std::string shaping_name = "baseline";
    std::uint64_t seed = 1;
    TrainConfig train;  // grid/shaping/seed filled in on resolve
    long checkpoint_every = 0;  // iterations between checkpoints, 0 = end only
    int eval_episodes = 100;
    bool stochastic_eval = false;
    int eval_threads = 1;

    static const std::vector<std::string>& known_keys() {
        static const std::vector<std::string> keys = {
            "experiment.env", "experiment.shaping", "experiment.seed",
            "grid.width", "grid.view", "grid.obstacles", "grid.max_steps",
            "grid.dynamic_obstacles", "grid.moving_goal", "grid.goal_move_period",
            "grid.dynamic_walls", "grid.wall_shift_period",
            "train.total_timesteps", "train.rollout", "train.minibatches", "train.epochs",
            "train.clip", "train.gamma", "train.gae_lambda", "train.learning_rate",
            "train.adam_eps", "train.max_grad_norm", "train.entropy_coef", "train.value_coef",
            "train.nre_coef", "train.paper_literal", "train.checkpoint_every",
            "net.conv1", "net.conv2", "net.conv3", "net.dense1", "net.dense2",
            "appraisal.epsilon", "appraisal.stress_weights",
            "eval.episodes", "eval.stochastic", "eval.threads"};
        return keys;
    }

    static ExperimentConfig from_ini(const IniDoc& doc) {
        for (const auto& [key, value] : doc.entries()) {
            const auto& known = known_keys();
            if (std::find(known.begin(), known.end(), key) == known.end()) {
                std::string list;
                for (const auto& k : known) list += "\n  " + k;
                throw ConfigError("config: unknown key '" + key + "'. Known keys:" + list);
            }
        }
        ExperimentConfig cfg;
        cfg.env_preset = doc.get_string("experiment", "env", cfg.env_preset);
        cfg.shaping_name = doc.get_string("experiment", "shaping", cfg.shaping_name);
        cfg.seed = doc.get_u64("experiment", "seed", cfg.seed);

        cfg.grid = cfg.env_preset == "custom" ? GridConfig{} : grid_preset(cfg.env_preset);
        cfg.grid.width = static_cast<int>(doc.get_int("grid", "width", cfg.grid.width));
        cfg.grid.view_size = static_cast<int>(doc.get_int("grid", "view", cfg.grid.view_size));
        cfg.grid.n_obstacles = static_cast<int>(doc.get_int("grid", "obstacles", cfg.grid.n_obstacles));
        cfg.grid.max_steps = static_cast<int>(doc.get_int("grid", "max_steps", cfg.grid.max_steps));
        cfg.grid.dynamic_obstacles =
            doc.get_bool("grid", "dynamic_obstacles", cfg.grid.dynamic_obstacles);
        cfg.grid.moving_goal = doc.get_bool("grid", "moving_goal", cfg.grid.moving_goal);
        cfg.grid.goal_move_period =
            static_cast<int>(doc.get_int("grid", "goal_move_period", cfg.grid.goal_move_period));
        cfg.grid.dynamic_walls = doc.get_bool("grid", "dynamic_walls", cfg.grid.dynamic_walls);
        cfg.grid.wall_shift_period =
            static_cast<int>(doc.get_int("grid", "wall_shift_period", cfg.grid.wall_shift_period));

        TrainConfig& t = cfg.train;
        t.total_timesteps = doc.get_int("train", "total_timesteps", t.total_timesteps);
        t.rollout_length = static_cast<int>(doc.get_int("train", "rollout", t.rollout_length));
        t.minibatches = static_cast<int>(doc.get_int("train", "minibatches", t.minibatches));
        t.epochs = static_cast<int>(doc.get_int("train", "epochs", t.epochs));
        t.clip_coef = doc.get_double("train", "clip", t.clip_coef);
        t.gamma = doc.get_double("train", "gamma", t.gamma);
        t.gae_lambda = doc.get_double("train", "gae_lambda", t.gae_lambda);
        t.learning_rate = doc.get_double("train", "learning_rate", t.learning_rate);
        t.adam_eps = doc.get_double("train", "adam_eps", t.adam_eps);
        t.max_grad_norm = doc.get_double("train", "max_grad_norm", t.max_grad_norm);
        t.c_entropy = doc.get_double("train", "entropy_coef", t.c_entropy);
        t.c_value = doc.get_double("train", "value_coef", t.c_value);
        t.c_nre = doc.get_double("train", "nre_coef", t.c_nre);
        t.paper_literal = doc.get_bool("train", "paper_literal", t.paper_literal);
        cfg.checkpoint_every = doc.get_int("train", "checkpoint_every", cfg.checkpoint_every);

        t.net.conv1 = static_cast<int>(doc.get_int("net", "conv1", t.net.conv1));
        t.net.conv2 = static_cast<int>(doc.get_int("net", "conv2", t.net.conv2));
        t.net.conv3 = static_cast<int>(doc.get_int("net", "conv3", t.net.conv3));
        t.net.dense1 = static_cast<int>(doc.get_int("net", "dense1", t.net.dense1));
        t.net.dense2 = static_cast<int>(doc.get_int("net", "dense2", t.net.dense2));

        t.appraisal.epsilon = doc.get_double("appraisal", "epsilon", t.appraisal.epsilon);
        const auto weights = doc.get_doubles(
            "appraisal", "stress_weights",
            std::vector<double>(t.appraisal.stress_weights.begin(), t.appraisal.stress_weights.end()));
        if (weights.size() != 6) throw ConfigError("config: stress_weights needs 6 entries");
        std::copy(weights.begin(), weights.end(), t.appraisal.stress_weights.begin());

        cfg.eval_episodes = static_cast<int>(doc.get_int("eval", "episodes", cfg.eval_episodes));
        cfg.stochastic_eval = doc.get_bool("eval", "stochastic", cfg.stochastic_eval);
        cfg.eval_threads = static_cast<int>(doc.get_int("eval", "threads", cfg.eval_threads));
        return cfg;
    }

    static ExperimentConfig from_file(const std::string& path) {
        return from_ini(IniDoc::parse_file(path));
    }

    void validate() const {
        grid.validate();
        if (eval_episodes < 1) throw ConfigError("config: eval episodes must be at least 1");
        if (eval_threads < 1) throw ConfigError("config: eval threads must be at least 1");
        ShapingConfig::parse(shaping_name);
    }

    TrainConfig resolved_train() const {
        TrainConfig t = train;
        t.grid = grid;
        t.shaping = ShapingConfig::parse(shaping_name);
        t.seed = seed;
        return t.resolved();
    }

    EvalConfig resolved_eval() const {
        EvalConfig e;
        e.grid = grid;
        e.shaping = ShapingConfig::parse(shaping_name);
        e.appraisal = train.appraisal;
        e.episodes = eval_episodes;
        e.base_seed = seed;
        e.stochastic = stochastic_eval;
        e.threads = eval_threads;
        return e.resolved();
    }

    // Round-trippable dump; also used for the resolved-config snapshot.
    std::string to_ini() const {
        std::ostringstream os;
        os << "[experiment]\n";
        os << "env = " << env_preset << "\n";
        os << "shaping = " << shaping_name << "\n";
        os << "seed = " << seed << "\n\n";
        os << "[grid]\n";
        os << "width = " << grid.width << "\n";
        os << "view = " << grid.view_size << "\n";
        os << "obstacles = " << grid.n_obstacles << "\n";
        os << "max_steps = " << grid.max_steps << "\n";
        os << "dynamic_obstacles = " << (grid.dynamic_obstacles ? "true" : "false") << "\n";
        os << "moving_goal = " << (grid.moving_goal ? "true" : "false") << "\n";
        os << "goal_move_period = " << grid.goal_move_period << "\n";
        os << "dynamic_walls = " << (grid.dynamic_walls ? "true" : "false") << "\n";
        os << "wall_shift_period = " << grid.wall_shift_period << "\n\n";
        os << "[train]\n";
        os << "total_timesteps = " << train.total_timesteps << "\n";
        os << "rollout = " << train.rollout_length << "\n";
        os << "minibatches = " << train.minibatches << "\n";
        os << "epochs = " << train.epochs << "\n";
        os << "clip = " << fmt(train.clip_coef) << "\n";
        os << "gamma = " << fmt(train.gamma) << "\n";
        os << "gae_lambda = " << fmt(train.gae_lambda) << "\n";
        os << "learning_rate = " << fmt(train.learning_rate) << "\n";
        os << "adam_eps = " << fmt(train.adam_eps) << "\n";
        os << "max_grad_norm = " << fmt(train.max_grad_norm) << "\n";
        os << "entropy_coef = " << fmt(train.c_entropy) << "\n";
        os << "value_coef = " << fmt(train.c_value) << "\n";
        os << "nre_coef = " << fmt(train.c_nre) << "\n";
        os << "paper_literal = " << (train.paper_literal ? "true" : "false") << "\n";
        os << "checkpoint_every = " << checkpoint_every << "\n\n";
        os << "[net]\n";
        os << "conv1 = " << train.net.conv1 << "\n";
        os << "conv2 = " << train.net.conv2 << "\n";
        os << "conv3 = " << train.net.conv3 << "\n";
        os << "dense1 = " << train.net.dense1 << "\n";
        os << "dense2 = " << train.net.dense2 << "\n\n";
        os << "[appraisal]\n";
        os << "epsilon = " << fmt(train.appraisal.epsilon) << "\n";
        os << "stress_weights = ";
        for (int i = 0; i < 6; ++i) os << (i ? "," : "") << fmt(train.appraisal.stress_weights[i]);
        os << "\n\n";
        os << "[eval]\n";
        os << "episodes = " << eval_episodes << "\n";
        os << "stochastic = " << (stochastic_eval ? "true" : "false") << "\n";
        os << "threads = " << eval_threads << "\n";
        return os.str();
    }

  private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return buf;
    }
};

// Evaluation run manifest: everything needed to replay the traces.
inline nlohmann::json eval_manifest(const ExperimentConfig& cfg, const std::string& fingerprint,
                                    const std::vector<std::uint64_t>& seeds) {
    nlohmann::json grid{{"width", cfg.grid.width},
                        {"view", cfg.grid.view_size},
                        {"obstacles", cfg.grid.n_obstacles},
                        {"max_steps", cfg.grid.max_steps},
                        {"dynamic_obstacles", cfg.grid.dynamic_obstacles},
                        {"moving_goal", cfg.grid.moving_goal},
                        {"goal_move_period", cfg.grid.goal_move_period},
                        {"dynamic_walls", cfg.grid.dynamic_walls},
                        {"wall_shift_period", cfg.grid.wall_shift_period}};
    nlohmann::json seed_list = nlohmann::json::array();
    for (std::uint64_t s : seeds) seed_list.push_back(std::to_string(s));
    return nlohmann::json{{"schema_version", 1},
                          {"env", cfg.env_preset},
                          {"grid", grid},
                          {"shaping", cfg.shaping_name},
                          {"episodes", cfg.eval_episodes},
                          {"stochastic", cfg.stochastic_eval},
                          {"checkpoint_fingerprint", fingerprint},
                          {"seeds", seed_list}};
}

inline GridConfig grid_from_manifest(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != 1)
        throw SchemaError("manifest: unsupported schema_version");
    const auto& g = j.at("grid");
    GridConfig cfg;
    cfg.width = g.at("width").get<int>();
    cfg.view_size = g.at("view").get<int>();
    cfg.n_obstacles = g.at("obstacles").get<int>();
    cfg.max_steps = g.at("max_steps").get<int>();
    cfg.dynamic_obstacles = g.at("dynamic_obstacles").get<bool>();
    cfg.moving_goal = g.at("moving_goal").get<bool>();
    cfg.goal_move_period = g.at("goal_move_period").get<int>();
    cfg.dynamic_walls = g.at("dynamic_walls").get<bool>();
    cfg.wall_shift_period = g.at("wall_shift_period").get<int>();
    return cfg;
}

}  // namespace apprl
