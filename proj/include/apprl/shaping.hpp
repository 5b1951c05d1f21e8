#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "apprl/appraisal.hpp"
#include "apprl/errors.hpp"
#include "apprl/rng.hpp"

namespace apprl {

enum class ShapingName {
    Baseline,
    Noise,
    AppraisalOnly,
    RSv1,
    RSv2,
    RSv3,
    RSv4,
    RSv5,
    RSv6,
    RSv7A,
    RSv7B,
};

enum class AuxMode { None, Noise6, Appraisal6 };

inline constexpr std::array<const char*, 11> kShapingNames = {
    "baseline", "noise", "appraisal", "rsv1", "rsv2", "rsv3", "rsv4", "rsv5", "rsv6", "rsv7a", "rsv7b"};

// One of the eleven experiment configurations: the reshaping rule plus the
// critic auxiliary-input mode.
struct ShapingConfig {
    ShapingName name = ShapingName::Baseline;
    AuxMode aux_mode = AuxMode::None;
    double rsv7_eps = 0.0;  // the small coping-potential factor of the rsv7 family

    static ShapingConfig make(ShapingName name) {
        ShapingConfig cfg;
        cfg.name = name;
        switch (name) {
            case ShapingName::Baseline: cfg.aux_mode = AuxMode::None; break;
            case ShapingName::Noise: cfg.aux_mode = AuxMode::Noise6; break;
            default: cfg.aux_mode = AuxMode::Appraisal6; break;
        }
        if (name == ShapingName::RSv7A) cfg.rsv7_eps = 0.01;
        if (name == ShapingName::RSv7B) cfg.rsv7_eps = 0.1;
        return cfg;
    }

    static ShapingConfig parse(std::string_view text) {
        std::string lower(text);
        for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        for (std::size_t i = 0; i < kShapingNames.size(); ++i) {
            if (lower == kShapingNames[i]) return make(static_cast<ShapingName>(i));
        }
        std::string valid;
        for (const char* n : kShapingNames) {
            if (!valid.empty()) valid += ", ";
            valid += n;
        }
        throw ConfigError("unknown shaping configuration '" + std::string(text) + "' (valid: " + valid + ")");
    }

    const char* canonical_name() const { return kShapingNames[static_cast<int>(name)]; }
    int aux_width() const { return aux_mode == AuxMode::None ? 0 : 6; }
};

// Applies the per-step reshaping rule of the active configuration.
inline double reshape(double reward, const AppraisalVector& z, const ShapingConfig& cfg) {
    switch (cfg.name) {
        case ShapingName::RSv1: return reward - 0.01 * (1.0 - z.mr);
        case ShapingName::RSv2: return reward - 0.01 * (1.0 - z.cp);
        case ShapingName::RSv3: return reward - 0.01 * (1.0 - z.gc);
        case ShapingName::RSv4: return reward - 0.01 * ((1.0 - z.mr) + (1.0 - z.gc));
        case ShapingName::RSv5:
            return reward - 0.01 * ((1.0 - z.mr) + (1.0 - z.cp) + (1.0 - z.gc));
        case ShapingName::RSv6: return reward - 0.1 * (z.mr + z.cp + z.gc);
        case ShapingName::RSv7A:
        case ShapingName::RSv7B:
            return reward - cfg.rsv7_eps * (1.0 - z.cp) - 0.1 * (z.mr + z.gc);
        default: return reward;
    }
}

// Auxiliary critic input: empty, six uniform draws, or the appraisals.
inline std::vector<double> critic_aux(const ShapingConfig& cfg, const AppraisalVector& z, Rng& rng) {
    switch (cfg.aux_mode) {
        case AuxMode::None: return {};
        case AuxMode::Noise6: {
            std::vector<double> out(6);
            for (double& v : out) v = rng.uniform();
            return out;
        }
        default: {
            const auto zs = z.as_array();
            return std::vector<double>(zs.begin(), zs.end());
        }
    }
}

}  // namespace apprl
