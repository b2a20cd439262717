#include "lorasub/ensemble_io.hpp"

#include <atomic>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

namespace lorasub {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::size_t dtype_size(BlobDtype dtype) {
    return dtype == BlobDtype::f64 ? 8 : 4;
}

BlobDtype parse_dtype(const std::string& text) {
    if (text == "f64") return BlobDtype::f64;
    if (text == "f32") return BlobDtype::f32;
    throw UnsupportedFormatError("unknown dtype '" + text + "'");
}

PayloadKind parse_kind(const std::string& text) {
    if (text == "ensemble") return PayloadKind::ensemble;
    if (text == "subspace") return PayloadKind::subspace;
    if (text == "basis") return PayloadKind::basis;
    throw UnsupportedFormatError("unknown payload kind '" + text + "'");
}

std::string encode_blob(const Matrix& m, BlobDtype dtype) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * dtype_size(dtype));
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (dtype == BlobDtype::f64) {
                const auto bits = std::bit_cast<std::uint64_t>(m(i, j));
                for (int k = 0; k < 8; ++k) {
                    out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
                }
            } else {
                const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j)));
                for (int k = 0; k < 4; ++k) {
                    out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
                }
            }
        }
    }
    return out;
}

Matrix decode_blob(const std::string& bytes, Index rows, Index cols, BlobDtype dtype) {
    Matrix out(rows, cols);
    const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            if (dtype == BlobDtype::f64) {
                std::uint64_t bits = 0;
                for (int k = 0; k < 8; ++k) {
                    bits |= static_cast<std::uint64_t>(p[k]) << (8 * k);
                }
                out(i, j) = std::bit_cast<double>(bits);
                p += 8;
            } else {
                std::uint32_t bits = 0;
                for (int k = 0; k < 4; ++k) {
                    bits |= static_cast<std::uint32_t>(p[k]) << (8 * k);
                }
                out(i, j) = static_cast<double>(std::bit_cast<float>(bits));
                p += 4;
            }
        }
    }
    return out;
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

Matrix read_blob(const fs::path& dir, const std::string& rel, Index rows, Index cols,
                 BlobDtype dtype) {
    const fs::path path = dir / rel;
    if (!fs::exists(path)) throw CorruptBlobError(rel, rows * cols * dtype_size(dtype), 0);
    const std::string bytes = read_file(path);
    const std::uint64_t expected =
        static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) * dtype_size(dtype);
    if (bytes.size() != expected) {
        throw CorruptBlobError(rel, expected, bytes.size());
    }
    return decode_blob(bytes, rows, cols, dtype);
}

std::string layer_tag(std::size_t ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "layer%03zu", ordinal);
    return buf;
}

// Writes everything into a temp sibling, then swaps it in.
class DirWriter {
public:
    explicit DirWriter(const fs::path& target) : target_(target) {
        static std::atomic<std::uint64_t> counter{0};
        tmp_ = target;
        tmp_ += ".tmp-" + std::to_string(counter.fetch_add(1)) + "-" +
                std::to_string(static_cast<std::uint64_t>(
                    std::hash<std::string>{}(target.string()) & 0xFFFF));
        std::error_code ec;
        fs::remove_all(tmp_, ec);
        if (!fs::create_directories(tmp_ / "blobs", ec) && ec) {
            throw IoError("cannot create '" + tmp_.string() + "': " + ec.message());
        }
    }

    ~DirWriter() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(tmp_, ec);
        }
    }

    const fs::path& dir() const { return tmp_; }

    void commit() {
        std::error_code ec;
        if (fs::exists(target_)) {
            fs::remove_all(target_, ec);
            if (ec) throw IoError("cannot replace '" + target_.string() + "': " + ec.message());
        }
        fs::rename(tmp_, target_, ec);
        if (ec) throw IoError("cannot move into '" + target_.string() + "': " + ec.message());
        committed_ = true;
    }

private:
    fs::path target_;
    fs::path tmp_;
    bool committed_ = false;
};

json manifest_shell(PayloadKind kind, const SaveOptions& options) {
    json manifest;
    manifest["format"] = kFormatId;
    manifest["kind"] = to_string(kind);
    manifest["dtype"] = to_string(options.dtype);
    manifest["layers"] = json::array();
    if (!options.metadata.is_null()) manifest["metadata"] = options.metadata;
    return manifest;
}

void write_manifest(const fs::path& dir, const json& manifest) {
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

json load_manifest(const fs::path& dir, PayloadKind expected) {
    const fs::path path = dir / "manifest.json";
    if (!fs::exists(path)) throw IoError("no manifest at '" + path.string() + "'");
    json manifest;
    try {
        manifest = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError("cannot parse '" + path.string() + "': " + e.what());
    }
    const std::string format = manifest.value("format", "");
    if (format != kFormatId) {
        throw UnsupportedFormatError("unsupported format '" + format + "', expected '" +
                                     std::string(kFormatId) + "'");
    }
    const PayloadKind kind = parse_kind(manifest.value("kind", ""));
    if (kind != expected) {
        throw InvalidInputError("directory holds kind '" + to_string(kind) + "', expected '" +
                                to_string(expected) + "'");
    }
    return manifest;
}

void check_layer_dims(const json& layer) {
    if (!layer.contains("n") || !layer.contains("m") || layer["n"].get<Index>() < 1 ||
        layer["m"].get<Index>() < 1) {
        throw DimensionError("manifest layer '" + layer.value("key", "?") +
                             "' has invalid dims");
    }
}

json config_to_json(const ExtractionConfig& config) {
    json out;
    out["target_dim"] = config.target_dim;
    out["alpha"] = config.alpha;
    if (config.epsilon) out["epsilon"] = *config.epsilon;
    out["max_iters"] = config.max_iters;
    out["rel_tol"] = config.rel_tol;
    return out;
}

ExtractionConfig config_from_json(const json& j) {
    ExtractionConfig config;
    config.target_dim = j.value("target_dim", Index{1});
    config.alpha = j.value("alpha", 1.0);
    if (j.contains("epsilon")) config.epsilon = j["epsilon"].get<double>();
    config.max_iters = j.value("max_iters", 50);
    config.rel_tol = j.value("rel_tol", 1e-8);
    return config;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const json& j) {
    Vector out(static_cast<Index>(j.size()));
    Index at = 0;
    for (const auto& value : j) out(at++) = value.get<double>();
    return out;
}

double dtype_tol(BlobDtype dtype) {
    // f32 blobs reach f64 invariant checks only at single precision.
    return dtype == BlobDtype::f64 ? 1e-8 : 1e-4;
}

void check_canonical(const SharedSubspace& s, BlobDtype dtype, const std::string& key) {
    const Matrix ga = s.a.transpose() * s.a;
    const Matrix gb = s.b.transpose() * s.b;
    const Matrix diag = Matrix(s.sigma.asDiagonal());
    const double scale = std::max(s.sigma.size() ? s.sigma.maxCoeff() : 0.0, 1e-300);
    const double tol = dtype_tol(dtype) * scale;
    if ((ga - diag).cwiseAbs().maxCoeff() > tol || (gb - diag).cwiseAbs().maxCoeff() > tol) {
        throw InvalidInputError("subspace '" + key + "' is not canonical (a^T a == b^T b == diag(sigma))");
    }
    for (Index i = 0; i + 1 < s.sigma.size(); ++i) {
        if (s.sigma(i + 1) > s.sigma(i)) {
            throw InvalidInputError("subspace '" + key + "' sigma is not non-increasing");
        }
    }
    if (s.sigma.size() && s.sigma(s.sigma.size() - 1) < 0.0) {
        throw InvalidInputError("subspace '" + key + "' sigma has negative entries");
    }
    for (std::size_t i = 0; i + 1 < s.objective_trace.size(); ++i) {
        if (s.objective_trace[i + 1] > s.objective_trace[i] + 1e-10) {
            throw InvalidInputError("subspace '" + key + "' objective trace increases");
        }
    }
}

void check_basis(const SubspaceBasis& basis, BlobDtype dtype, const std::string& key) {
    const double tol = dtype_tol(dtype);
    const Index dim = basis.dim();
    if (basis.b_bar.cols() != dim) {
        throw DimensionError("basis '" + key + "' sides disagree on D");
    }
    const Matrix ia = basis.a_bar.transpose() * basis.a_bar - Matrix::Identity(dim, dim);
    const Matrix ib = basis.b_bar.transpose() * basis.b_bar - Matrix::Identity(dim, dim);
    if (ia.cwiseAbs().maxCoeff() > tol || ib.cwiseAbs().maxCoeff() > tol) {
        throw InvalidInputError("basis '" + key + "' columns are not orthonormal");
    }
}

}  // namespace

std::string to_string(BlobDtype dtype) {
    return dtype == BlobDtype::f64 ? "f64" : "f32";
}

std::string to_string(PayloadKind kind) {
    switch (kind) {
        case PayloadKind::ensemble: return "ensemble";
        case PayloadKind::subspace: return "subspace";
        case PayloadKind::basis: return "basis";
    }
    return {};
}

void save_ensemble(const fs::path& dir, const LoraEnsemble& ensemble,
                   const SaveOptions& options) {
    const auto violations = validate_ensemble(ensemble);
    if (!violations.empty()) {
        throw InvalidInputError("refusing to save invalid ensemble: " +
                                violations.front().layer.str() + ": " +
                                violations.front().rule + ": " + violations.front().detail);
    }
    DirWriter writer(dir);
    json manifest = manifest_shell(PayloadKind::ensemble, options);
    std::size_t ordinal = 0;
    for (const auto& [key, adapters] : ensemble.layers) {
        const auto [n, m] = ensemble.dims.at(key);
        json layer;
        layer["key"] = key.str();
        layer["n"] = n;
        layer["m"] = m;
        layer["adapters"] = json::array();
        const std::string tag = layer_tag(ordinal++);
        for (std::size_t i = 0; i < adapters.size(); ++i) {
            const std::string a_rel = "blobs/" + tag + ".a" + std::to_string(i) + ".bin";
            const std::string b_rel = "blobs/" + tag + ".b" + std::to_string(i) + ".bin";
            write_file(writer.dir() / a_rel, encode_blob(adapters[i].a, options.dtype));
            write_file(writer.dir() / b_rel, encode_blob(adapters[i].b, options.dtype));
            layer["adapters"].push_back({{"a", a_rel}, {"b", b_rel}, {"rank", adapters[i].rank()}});
        }
        manifest["layers"].push_back(layer);
    }
    write_manifest(writer.dir(), manifest);
    writer.commit();
}

void save_subspaces(const fs::path& dir, const SubspaceSetFile& file,
                    const SaveOptions& options) {
    for (const auto& [key, s] : file.subspaces) {
        check_canonical(s, BlobDtype::f64, key.str());
    }
    DirWriter writer(dir);
    json manifest = manifest_shell(PayloadKind::subspace, options);
    if (!file.metadata.is_null()) manifest["metadata"] = file.metadata;

    // Successful and failed layers share one ordered list, keyed alike.
    std::map<LayerKey, const SharedSubspace*> ok;
    for (const auto& [key, s] : file.subspaces) ok[key] = &s;
    std::map<LayerKey, json> entries;
    std::size_t ordinal = 0;
    for (const auto& [key, s] : ok) {
        json layer;
        layer["key"] = key.str();
        layer["n"] = s->a.rows();
        layer["m"] = s->b.rows();
        layer["d_prime"] = s->a.cols();
        const std::string tag = layer_tag(ordinal++);
        const std::string a_rel = "blobs/" + tag + ".a.bin";
        const std::string b_rel = "blobs/" + tag + ".b.bin";
        write_file(writer.dir() / a_rel, encode_blob(s->a, options.dtype));
        write_file(writer.dir() / b_rel, encode_blob(s->b, options.dtype));
        layer["a"] = a_rel;
        layer["b"] = b_rel;
        layer["sigma"] = vector_to_json(s->sigma);
        layer["weights"] = vector_to_json(s->weights);
        layer["objective_trace"] = s->objective_trace;
        layer["residual"] = s->objective_trace.empty() ? 0.0 : s->objective_trace.back();
        layer["iterations"] = s->iterations();
        layer["rank_deficient"] = s->rank_deficient;
        layer["config"] = config_to_json(s->config);
        entries[key] = std::move(layer);
    }
    for (const auto& [key, message] : file.failed) {
        json layer;
        layer["key"] = key.str();
        layer["failed"] = true;
        layer["error"] = message;
        entries[key] = std::move(layer);
    }
    for (auto& [key, layer] : entries) {
        manifest["layers"].push_back(std::move(layer));
    }
    write_manifest(writer.dir(), manifest);
    writer.commit();
}

void save_basis(const fs::path& dir, const BasisSet& bases, const SaveOptions& options) {
    for (const auto& [key, basis] : bases) {
        check_basis(basis, BlobDtype::f64, key.str());
    }
    DirWriter writer(dir);
    json manifest = manifest_shell(PayloadKind::basis, options);
    std::size_t ordinal = 0;
    for (const auto& [key, basis] : bases) {
        json layer;
        layer["key"] = key.str();
        layer["n"] = basis.a_bar.rows();
        layer["m"] = basis.b_bar.rows();
        layer["d"] = basis.dim();
        layer["truncated"] = basis.truncated;
        const std::string tag = layer_tag(ordinal++);
        const std::string a_rel = "blobs/" + tag + ".a_bar.bin";
        const std::string b_rel = "blobs/" + tag + ".b_bar.bin";
        write_file(writer.dir() / a_rel, encode_blob(basis.a_bar, options.dtype));
        write_file(writer.dir() / b_rel, encode_blob(basis.b_bar, options.dtype));
        layer["a_bar"] = a_rel;
        layer["b_bar"] = b_rel;
        layer["blocks"] = json::array();
        for (const auto& block : basis.blocks) {
            layer["blocks"].push_back({{"attribute", block.attribute.str()},
                                       {"source_dim", block.source_dim},
                                       {"col_start", block.col_start},
                                       {"col_count", block.col_count}});
        }
        manifest["layers"].push_back(layer);
    }
    write_manifest(writer.dir(), manifest);
    writer.commit();
}

PayloadKind probe_kind(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    if (!fs::exists(path)) throw IoError("no manifest at '" + path.string() + "'");
    json manifest;
    try {
        manifest = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError("cannot parse '" + path.string() + "': " + e.what());
    }
    const std::string format = manifest.value("format", "");
    if (format != kFormatId) {
        throw UnsupportedFormatError("unsupported format '" + format + "'");
    }
    return parse_kind(manifest.value("kind", ""));
}

LoraEnsemble load_ensemble(const fs::path& dir) {
    const json manifest = load_manifest(dir, PayloadKind::ensemble);
    const BlobDtype dtype = parse_dtype(manifest.value("dtype", ""));
    LoraEnsemble ensemble;
    for (const auto& layer : manifest.at("layers")) {
        check_layer_dims(layer);
        const LayerKey key = LayerKey::parse(layer.at("key").get<std::string>());
        const auto n = layer.at("n").get<Index>();
        const auto m = layer.at("m").get<Index>();
        ensemble.layers[key];
        ensemble.dims.emplace(key, std::pair<Index, Index>{n, m});
        for (const auto& entry : layer.at("adapters")) {
            const auto rank = entry.at("rank").get<Index>();
            if (rank < 1) throw DimensionError("adapter rank must be >= 1");
            LoraAdapter adapter;
            adapter.a = read_blob(dir, entry.at("a").get<std::string>(), n, rank, dtype);
            adapter.b = read_blob(dir, entry.at("b").get<std::string>(), m, rank, dtype);
            ensemble.add_adapter(key, std::move(adapter));
        }
    }
    const auto violations = validate_ensemble(ensemble);
    if (!violations.empty()) {
        throw InvalidInputError("loaded ensemble violates invariants: " +
                                violations.front().layer.str() + ": " +
                                violations.front().rule + ": " + violations.front().detail);
    }
    return ensemble;
}

SubspaceSetFile load_subspaces(const fs::path& dir) {
    const json manifest = load_manifest(dir, PayloadKind::subspace);
    const BlobDtype dtype = parse_dtype(manifest.value("dtype", ""));
    SubspaceSetFile out;
    if (manifest.contains("metadata")) out.metadata = manifest["metadata"];
    for (const auto& layer : manifest.at("layers")) {
        const LayerKey key = LayerKey::parse(layer.at("key").get<std::string>());
        if (layer.value("failed", false)) {
            out.failed[key] = layer.value("error", "unknown error");
            continue;
        }
        check_layer_dims(layer);
        const auto n = layer.at("n").get<Index>();
        const auto m = layer.at("m").get<Index>();
        const auto d = layer.at("d_prime").get<Index>();
        if (d < 1 || d > std::min(n, m)) {
            throw DimensionError("subspace '" + key.str() + "' has invalid d_prime");
        }
        SharedSubspace s;
        s.layer = key;
        s.a = read_blob(dir, layer.at("a").get<std::string>(), n, d, dtype);
        s.b = read_blob(dir, layer.at("b").get<std::string>(), m, d, dtype);
        s.sigma = vector_from_json(layer.at("sigma"));
        s.weights = vector_from_json(layer.at("weights"));
        s.objective_trace = layer.at("objective_trace").get<std::vector<double>>();
        s.rank_deficient = layer.value("rank_deficient", false);
        s.config = config_from_json(layer.value("config", json::object()));
        if (s.sigma.size() != d) {
            throw DimensionError("subspace '" + key.str() + "' sigma length != d_prime");
        }
        check_canonical(s, dtype, key.str());
        out.subspaces[key] = std::move(s);
    }
    return out;
}

BasisSet load_basis(const fs::path& dir) {
    const json manifest = load_manifest(dir, PayloadKind::basis);
    const BlobDtype dtype = parse_dtype(manifest.value("dtype", ""));
    BasisSet out;
    for (const auto& layer : manifest.at("layers")) {
        check_layer_dims(layer);
        const LayerKey key = LayerKey::parse(layer.at("key").get<std::string>());
        const auto n = layer.at("n").get<Index>();
        const auto m = layer.at("m").get<Index>();
        const auto d = layer.at("d").get<Index>();
        if (d < 1 || d > std::min(n, m)) {
            throw DimensionError("basis '" + key.str() + "' has invalid D");
        }
        SubspaceBasis basis;
        basis.a_bar = read_blob(dir, layer.at("a_bar").get<std::string>(), n, d, dtype);
        basis.b_bar = read_blob(dir, layer.at("b_bar").get<std::string>(), m, d, dtype);
        basis.truncated = layer.value("truncated", false);
        for (const auto& entry : layer.value("blocks", json::array())) {
            basis.blocks.push_back({Attribute::parse(entry.at("attribute").get<std::string>()),
                                    entry.at("source_dim").get<Index>(),
                                    entry.at("col_start").get<Index>(),
                                    entry.at("col_count").get<Index>()});
        }
        check_basis(basis, dtype, key.str());
        out[key] = std::move(basis);
    }
    return out;
}

void write_matrix_blob(const fs::path& path, const Matrix& m, BlobDtype dtype) {
    write_file(path, encode_blob(m, dtype));
}

Matrix read_matrix_blob(const fs::path& path, Index rows, Index cols, BlobDtype dtype) {
    return read_blob(path.parent_path(), path.filename().string(), rows, cols, dtype);
}

nlohmann::json load_metadata(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    if (!fs::exists(path)) throw IoError("no manifest at '" + path.string() + "'");
    json manifest;
    try {
        manifest = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw IoError("cannot parse '" + path.string() + "': " + e.what());
    }
    return manifest.value("metadata", json());
}

}  // namespace lorasub
