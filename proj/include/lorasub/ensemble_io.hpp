#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "lorasub/model.hpp"

namespace lorasub {

inline constexpr const char* kFormatId = "lora-subspace/v1";

enum class BlobDtype { f32, f64 };
enum class PayloadKind { ensemble, subspace, basis };

std::string to_string(BlobDtype dtype);
std::string to_string(PayloadKind kind);

struct SaveOptions {
    BlobDtype dtype = BlobDtype::f64;
    nlohmann::json metadata;  // stored under "metadata" when non-null
};

using SubspaceSet = std::map<LayerKey, SharedSubspace>;
using BasisSet = std::map<LayerKey, SubspaceBasis>;

// A subspace directory's content: per-layer results plus markers for layers
// whose extraction failed.
struct SubspaceSetFile {
    SubspaceSet subspaces;
    std::map<LayerKey, std::string> failed;  // layer -> error message
    nlohmann::json metadata;
};

// Directory layout: manifest.json (UTF-8, keys sorted) plus one raw blob per
// matrix under blobs/ — row-major little-endian IEEE-754, no header. Writers
// build a temp sibling directory and rename over the target.
void save_ensemble(const std::filesystem::path& dir, const LoraEnsemble& ensemble,
                   const SaveOptions& options = {});
void save_subspaces(const std::filesystem::path& dir, const SubspaceSetFile& file,
                    const SaveOptions& options = {});
void save_basis(const std::filesystem::path& dir, const BasisSet& bases,
                const SaveOptions& options = {});

// Manifest "kind" of an existing directory.
PayloadKind probe_kind(const std::filesystem::path& dir);

// Loaders re-validate type invariants and widen f32 blobs to f64.
LoraEnsemble load_ensemble(const std::filesystem::path& dir);
SubspaceSetFile load_subspaces(const std::filesystem::path& dir);
BasisSet load_basis(const std::filesystem::path& dir);

// The manifest's "metadata" object (null when absent).
nlohmann::json load_metadata(const std::filesystem::path& dir);

// Raw blob primitives shared by every directory format: row-major
// little-endian IEEE-754, no header. Reading checks the byte length against
// rows * cols * sizeof(dtype) and throws CorruptBlobError on mismatch.
void write_matrix_blob(const std::filesystem::path& path, const Matrix& m,
                       BlobDtype dtype = BlobDtype::f64);
Matrix read_matrix_blob(const std::filesystem::path& path, Index rows, Index cols,
                        BlobDtype dtype = BlobDtype::f64);

}  // namespace lorasub
