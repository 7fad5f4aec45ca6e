#include "tstlab/losses.hpp"

namespace tstlab {

const char* weight_kind_name(WeightKind k) {
    switch (k) {
        case WeightKind::uniform: return "uniform";
        case WeightKind::power_law: return "power_law";
        case WeightKind::exponential: return "exponential";
        case WeightKind::first_token: return "first_token";
        case WeightKind::fitted: return "fitted";
    }
    throw ContractError("weight_kind_name: bad enum value");
}

WeightKind weight_kind_from(const std::string& s) {
    if (s == "uniform") return WeightKind::uniform;
    if (s == "power_law") return WeightKind::power_law;
    if (s == "exponential") return WeightKind::exponential;
    if (s == "first_token") return WeightKind::first_token;
    if (s == "fitted") return WeightKind::fitted;
    throw ConfigError("unknown bag weighting '" + s + "'");
}

const char* mce_variant_name(MceVariant v) {
    switch (v) {
        case MceVariant::simplified: return "simplified";
        case MceVariant::corrected: return "corrected";
        case MceVariant::alternative: return "alternative";
    }
    throw ContractError("mce_variant_name: bad enum value");
}

MceVariant mce_variant_from(const std::string& s) {
    if (s == "simplified") return MceVariant::simplified;
    if (s == "corrected") return MceVariant::corrected;
    if (s == "alternative") return MceVariant::alternative;
    throw ConfigError("unknown loss variant '" + s + "'");
}

}  // namespace tstlab
