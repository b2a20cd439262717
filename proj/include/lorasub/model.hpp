#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lorasub/linalg.hpp"

namespace lorasub {

enum class AttributeKind { texture, geometry, camera, lighting, other };

// Dataset-variation label. The four named kinds match the paper's figures;
// `other` carries a free-form tag ([a-z0-9_]+).
struct Attribute {
    AttributeKind kind = AttributeKind::other;
    std::string tag;  // set only for AttributeKind::other

    auto operator<=>(const Attribute&) const = default;

    std::string str() const;  // "tex" | "geo" | "cam" | "lig" | "other:<tag>"
    static Attribute parse(std::string_view text);

    static Attribute texture() { return {AttributeKind::texture, {}}; }
    static Attribute geometry() { return {AttributeKind::geometry, {}}; }
    static Attribute camera() { return {AttributeKind::camera, {}}; }
    static Attribute lighting() { return {AttributeKind::lighting, {}}; }
    static Attribute other(std::string tag) { return {AttributeKind::other, std::move(tag)}; }
};

enum class LayerScope { global, frame };
enum class LayerKind { atten_qkv, atten_proj, mlp_fc1, mlp_fc2 };

std::string to_string(LayerScope scope);  // "g" | "l"
std::string to_string(LayerKind kind);    // "atten-qkv" | "atten-proj" | "mlp-fc1" | "mlp-fc2"

// Where a layer sits in the transformer, independent of attribute.
struct LayerSite {
    LayerScope scope = LayerScope::global;
    LayerKind kind = LayerKind::atten_qkv;
    int index = 1;

    auto operator<=>(const LayerSite&) const = default;
    std::string str() const;  // "<g|l>-<kind>-<index>"
};

// Identity of one weight matrix's adapter collection. Serialized form:
// "<attr>-<g|l>-<atten-qkv|atten-proj|mlp-fc1|mlp-fc2>-<index>",
// e.g. "tex-g-atten-qkv-1".
struct LayerKey {
    Attribute attribute;
    LayerScope scope = LayerScope::global;
    LayerKind kind = LayerKind::atten_qkv;
    int index = 1;

    auto operator<=>(const LayerKey&) const = default;

    LayerSite site() const { return {scope, kind, index}; }
    std::string str() const;
    // max_index is the configurable upper bound on the layer index (48 for
    // the reference model).
    static LayerKey parse(std::string_view text, int max_index = 48);
};

// One adapter's factor pair; the update it represents is a * b^T.
struct LoraAdapter {
    Matrix a;  // n x r
    Matrix b;  // m x r

    Index rank() const { return a.cols(); }
    FactoredMatrix factored() const { return {a, b}; }
};

// Per-layer collections of adapters sharing (n, m).
struct LoraEnsemble {
    std::map<LayerKey, std::vector<LoraAdapter>> layers;
    std::map<LayerKey, std::pair<Index, Index>> dims;  // (n, m) per layer

    // Registers the layer's dims on first insert.
    void add_adapter(const LayerKey& key, LoraAdapter adapter);
};

// Knobs of the robust extraction. epsilon is the weight-update smoothing
// term; when unset it resolves to 1e-8 * (mean adapter Frobenius norm).
struct ExtractionConfig {
    Index target_dim = 8;  // d'
    double alpha = 1.0;
    std::optional<double> epsilon;
    int max_iters = 50;
    double rel_tol = 1e-8;

    void validate() const;
};

// Extraction output in canonical form: a = U sqrt(S), b = V sqrt(S), so
// a^T a == b^T b == diag(sigma).
struct SharedSubspace {
    Matrix a;  // n x d'
    Matrix b;  // m x d'
    Vector sigma;
    Vector weights;  // final IRLS weights, renormalized to sum k
    std::vector<double> objective_trace;
    ExtractionConfig config;  // epsilon resolved
    LayerKey layer;
    bool rank_deficient = false;  // d' exceeded rank(C); trailing columns are zero

    int iterations() const { return static_cast<int>(objective_trace.size()); }
};

// Provenance of one source subspace inside an assembled basis.
struct BasisBlock {
    Attribute attribute;
    Index source_dim = 0;  // the source subspace's d'
    Index col_start = 0;   // first column in a_bar/b_bar, [col_start, col_start+col_count)
    Index col_count = 0;
};

// Orthonormalized concatenation of per-attribute subspaces; within it only
// the D x D core of dW = a_bar * M * b_bar^T is trainable.
struct SubspaceBasis {
    Matrix a_bar;  // n x D, orthonormal columns
    Matrix b_bar;  // m x D, orthonormal columns
    std::vector<BasisBlock> blocks;
    bool truncated = false;  // sides disagreed on rank and were cut to the minimum

    Index dim() const { return a_bar.cols(); }
};

// Dense n x m product of one adapter. Desk-scale use only.
Matrix adapter_delta_dense(const LoraAdapter& adapter);

struct Violation {
    LayerKey layer;
    std::string rule;  // "DimensionMismatch" | "RankBound" | "EmptyLayer" | "NonFinite"
    std::string detail;
};

// Empty iff every type invariant holds; violations are data, not failures.
std::vector<Violation> validate_ensemble(const LoraEnsemble& ensemble);

}  // namespace lorasub
