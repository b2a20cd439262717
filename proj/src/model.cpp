#include "lorasub/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace lorasub {

namespace {

bool valid_tag(std::string_view tag) {
    if (tag.empty()) return false;
    return std::all_of(tag.begin(), tag.end(), [](unsigned char c) {
        return std::islower(c) || std::isdigit(c) || c == '_';
    });
}

[[noreturn]] void bad_key(std::string_view text, const std::string& why) {
    throw InvalidInputError("cannot parse layer key '" + std::string(text) + "': " + why);
}

}  // namespace

std::string Attribute::str() const {
    switch (kind) {
        case AttributeKind::texture: return "tex";
        case AttributeKind::geometry: return "geo";
        case AttributeKind::camera: return "cam";
        case AttributeKind::lighting: return "lig";
        case AttributeKind::other: return "other:" + tag;
    }
    return {};
}

Attribute Attribute::parse(std::string_view text) {
    if (text == "tex") return texture();
    if (text == "geo") return geometry();
    if (text == "cam") return camera();
    if (text == "lig") return lighting();
    if (text.rfind("other:", 0) == 0) {
        std::string tag(text.substr(6));
        if (!valid_tag(tag)) {
            throw InvalidInputError("attribute tag '" + tag + "' must match [a-z0-9_]+");
        }
        return other(std::move(tag));
    }
    throw InvalidInputError("unknown attribute '" + std::string(text) + "'");
}

std::string to_string(LayerScope scope) {
    return scope == LayerScope::global ? "g" : "l";
}

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::atten_qkv: return "atten-qkv";
        case LayerKind::atten_proj: return "atten-proj";
        case LayerKind::mlp_fc1: return "mlp-fc1";
        case LayerKind::mlp_fc2: return "mlp-fc2";
    }
    return {};
}

std::string LayerSite::str() const {
    return to_string(scope) + "-" + to_string(kind) + "-" + std::to_string(index);
}

std::string LayerKey::str() const {
    return attribute.str() + "-" + site().str();
}

LayerKey LayerKey::parse(std::string_view text, int max_index) {
    // Rightmost fields are fixed-shape; the attribute is whatever precedes
    // the scope marker (tags may not contain '-').
    const auto last_dash = text.rfind('-');
    if (last_dash == std::string_view::npos) bad_key(text, "missing index");
    int index = 0;
    const auto idx_str = text.substr(last_dash + 1);
    auto [ptr, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), index);
    if (ec != std::errc() || ptr != idx_str.data() + idx_str.size()) {
        bad_key(text, "index is not an integer");
    }
    if (index < 1 || index > max_index) {
        bad_key(text, "index " + std::to_string(index) + " outside 1.." + std::to_string(max_index));
    }
    std::string_view rest = text.substr(0, last_dash);

    LayerKind kind{};
    bool kind_found = false;
    for (auto candidate : {LayerKind::atten_qkv, LayerKind::atten_proj, LayerKind::mlp_fc1,
                           LayerKind::mlp_fc2}) {
        const std::string suffix = "-" + to_string(candidate);
        if (rest.size() > suffix.size() &&
            rest.substr(rest.size() - suffix.size()) == suffix) {
            kind = candidate;
            rest = rest.substr(0, rest.size() - suffix.size());
            kind_found = true;
            break;
        }
    }
    if (!kind_found) bad_key(text, "unknown layer kind");

    if (rest.size() < 2 || (rest.back() != 'g' && rest.back() != 'l')) {
        bad_key(text, "missing scope marker (g|l)");
    }
    const LayerScope scope = rest.back() == 'g' ? LayerScope::global : LayerScope::frame;
    if (rest[rest.size() - 2] != '-') bad_key(text, "missing scope separator");
    rest = rest.substr(0, rest.size() - 2);

    return {Attribute::parse(rest), scope, kind, index};
}

void LoraEnsemble::add_adapter(const LayerKey& key, LoraAdapter adapter) {
    auto it = dims.find(key);
    if (it == dims.end()) {
        dims[key] = {adapter.a.rows(), adapter.b.rows()};
    }
    layers[key].push_back(std::move(adapter));
}

void ExtractionConfig::validate() const {
    if (target_dim < 1) throw InvalidInputError("config: target_dim must be >= 1");
    if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidInputError("config: alpha must be in (0, 2]");
    if (epsilon && !(*epsilon > 0.0)) throw InvalidInputError("config: epsilon must be positive");
    if (max_iters < 1) throw InvalidInputError("config: max_iters must be >= 1");
    if (!(rel_tol > 0.0)) throw InvalidInputError("config: rel_tol must be positive");
}

Matrix adapter_delta_dense(const LoraAdapter& adapter) {
    if (adapter.a.cols() != adapter.b.cols()) {
        throw DimensionError("adapter_delta_dense: factor widths differ");
    }
    return adapter.a * adapter.b.transpose();
}

std::vector<Violation> validate_ensemble(const LoraEnsemble& ensemble) {
    std::vector<Violation> out;
    for (const auto& [key, adapters] : ensemble.layers) {
        if (adapters.empty()) {
            out.push_back({key, "EmptyLayer", "layer has no adapters"});
            continue;
        }
        auto dims_it = ensemble.dims.find(key);
        const Index n = dims_it != ensemble.dims.end() ? dims_it->second.first
                                                       : adapters.front().a.rows();
        const Index m = dims_it != ensemble.dims.end() ? dims_it->second.second
                                                       : adapters.front().b.rows();
        for (std::size_t i = 0; i < adapters.size(); ++i) {
            const auto& ad = adapters[i];
            const std::string which = "adapter " + std::to_string(i);
            if (ad.a.rows() != n || ad.b.rows() != m || ad.a.cols() != ad.b.cols()) {
                out.push_back({key, "DimensionMismatch",
                               which + " is " + std::to_string(ad.a.rows()) + "x" +
                                   std::to_string(ad.a.cols()) + " / " +
                                   std::to_string(ad.b.rows()) + "x" +
                                   std::to_string(ad.b.cols()) + ", layer is " +
                                   std::to_string(n) + "x" + std::to_string(m)});
                continue;
            }
            if (ad.rank() < 1 || ad.rank() > std::min(n, m)) {
                out.push_back({key, "RankBound",
                               which + " has rank " + std::to_string(ad.rank()) +
                                   ", bound is min(n, m) = " +
                                   std::to_string(std::min(n, m))});
            }
            if (!ad.a.allFinite() || !ad.b.allFinite()) {
                out.push_back({key, "NonFinite", which + " contains NaN or Inf"});
            }
        }
    }
    return out;
}

}  // namespace lorasub
