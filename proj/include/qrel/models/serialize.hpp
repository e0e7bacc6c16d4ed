#pragma once

// Classifier files: "QRMD", u32 version, u32-length JSON header (model kind,
// dimensions, variant, seed, vocabularies), u32 tensor count, then per
// tensor: u16-length name, u32 rows, u32 cols, rows x cols float64. All
// integers and floats little-endian.

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "qrel/binary_io.hpp"
#include "qrel/models/lr.hpp"
#include "qrel/models/mlp.hpp"
#include "qrel/models/poslstm.hpp"
#include "qrel/models/relnet.hpp"

namespace qrel {

inline constexpr std::uint32_t kModelFileVersion = 1;

inline void write_model_file(const std::string& path, const nlohmann::json& header, const std::vector<const Param*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write model " + path);
  bin::put_magic(out, "QRMD");
  bin::put_u32(out, kModelFileVersion);
  bin::put_str32(out, header.dump());
  bin::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto* p : tensors) {
    bin::put_str16(out, p->name);
    bin::put_u32(out, static_cast<std::uint32_t>(p->rows));
    bin::put_u32(out, static_cast<std::uint32_t>(p->cols));
    for (double v : p->value) bin::put_f64(out, v);
  }
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

struct ModelFile {
  nlohmann::json header;
  std::map<std::string, Param> tensors;

  // Copies a stored tensor into p, checking its shape.
  void restore(Param& p) const {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) fail(ErrorCode::corrupt, "model file lacks tensor '" + p.name + "'");
    if (it->second.rows != p.rows || it->second.cols != p.cols) {
      fail(ErrorCode::corrupt, "tensor '" + p.name + "' has shape " + std::to_string(it->second.rows) + "x" +
                                   std::to_string(it->second.cols) + ", expected " + std::to_string(p.rows) + "x" + std::to_string(p.cols));
    }
    p.value = it->second.value;
  }
};

inline ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open model " + path);
  bin::Reader r(in, path);
  r.expect_magic("QRMD");
  if (r.u32() != kModelFileVersion) fail(ErrorCode::corrupt, path + ": unsupported model version");
  ModelFile mf;
  try {
    mf.header = nlohmann::json::parse(r.str32());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::corrupt, path + ": bad header: " + e.what());
  }
  const auto count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    Param p;
    p.name = r.str16();
    p.rows = r.u32();
    p.cols = r.u32();
    p.value.resize(p.rows * p.cols);
    for (auto& v : p.value) v = r.f64();
    auto name = p.name;
    mf.tensors.emplace(std::move(name), std::move(p));
  }
  return mf;
}

namespace detail {

inline std::vector<const Param*> as_const(const std::vector<Param*>& ps) { return {ps.begin(), ps.end()}; }

inline Param frozen(std::string name, std::size_t rows, std::size_t cols, std::vector<double> values) {
  Param p(std::move(name), rows, cols);
  p.value = std::move(values);
  p.trainable = false;
  return p;
}

inline void append_pca(std::vector<Param>& out, const PCAModel& pca) {
  out.push_back(frozen("pca.mean", 1, pca.input_dim(), pca.mean));
  out.push_back(frozen("pca.components", pca.output_dim(), pca.input_dim(), pca.components.data));
  out.push_back(frozen("pca.eigenvalues", 1, pca.output_dim(), pca.eigenvalues));
}

inline void write_with_pca(const std::string& path, const nlohmann::json& header, std::vector<const Param*> tensors,
                           const PCAModel* pca) {
  std::vector<Param> extra;
  if (pca) append_pca(extra, *pca);
  for (const auto& p : extra) tensors.push_back(&p);
  write_model_file(path, header, tensors);
}

}  // namespace detail

// PCA block stored alongside a model, if any.
inline std::optional<PCAModel> stored_pca(const ModelFile& mf) {
  auto mean = mf.tensors.find("pca.mean");
  auto comps = mf.tensors.find("pca.components");
  auto eig = mf.tensors.find("pca.eigenvalues");
  if (mean == mf.tensors.end() || comps == mf.tensors.end() || eig == mf.tensors.end()) return std::nullopt;
  if (comps->second.cols != mean->second.size() || eig->second.size() != comps->second.rows) {
    fail(ErrorCode::corrupt, "stored PCA tensors have inconsistent shapes");
  }
  PCAModel pm;
  pm.mean = mean->second.value;
  pm.components = Matrix(comps->second.rows, comps->second.cols);
  pm.components.data = comps->second.value;
  pm.eigenvalues = eig->second.value;
  return pm;
}

// `extra` carries caller metadata (kind, seed, featurization settings). LR
// and MLP models may carry the PCA used to build their inputs.
inline void save_model(const std::string& path, LRModel& m, nlohmann::json extra, const PCAModel* pca = nullptr) {
  extra["model"] = "lr";
  extra["dim"] = m.dim();
  detail::write_with_pca(path, extra, detail::as_const(m.params()), pca);
}

inline void save_model(const std::string& path, MLPModel& m, nlohmann::json extra, const PCAModel* pca = nullptr) {
  extra["model"] = "mlp";
  extra["layer_dims"] = m.layer_dims;
  detail::write_with_pca(path, extra, detail::as_const(m.params()), pca);
}

inline void save_model(const std::string& path, PosLstmModel& m, nlohmann::json extra) {
  extra["model"] = "poslstm";
  extra["tags"] = m.tags.known();
  extra["tag_dim"] = m.tag_dim;
  extra["hidden_dim"] = m.hidden_dim;
  write_model_file(path, extra, detail::as_const(m.params()));
}

inline void save_model(const std::string& path, RelNetModel& m, nlohmann::json extra) {
  extra["model"] = "relnet";
  extra["variant"] = m.variant;
  extra["feature_dim"] = m.dims.feature_dim;
  extra["embed_dim"] = m.dims.embed_dim;
  extra["hidden_dim"] = m.dims.hidden_dim;
  extra["image_dim"] = m.dims.image_dim;
  extra["step_one"] = to_string(m.step_one);
  extra["tokens"] = m.tokens.known();
  detail::write_with_pca(path, extra, detail::as_const(m.params()), m.variant == 1 ? &m.pca : nullptr);
}

using AnyModel = std::variant<LRModel, MLPModel, PosLstmModel, RelNetModel>;

inline AnyModel load_model(const ModelFile& mf) {
  const auto kind = mf.header.at("model").get<std::string>();
  if (kind == "lr") {
    LRModel m(mf.header.at("dim").get<std::size_t>());
    for (auto* p : m.params()) mf.restore(*p);
    return m;
  }
  if (kind == "mlp") {
    MLPModel m(mf.header.at("layer_dims").get<std::vector<std::size_t>>());
    for (auto* p : m.params()) mf.restore(*p);
    return m;
  }
  if (kind == "poslstm") {
    PosLstmModel m(SymbolVocab(mf.header.at("tags").get<std::vector<std::string>>()), mf.header.at("tag_dim").get<std::size_t>(),
                   mf.header.at("hidden_dim").get<std::size_t>());
    for (auto* p : m.params()) mf.restore(*p);
    return m;
  }
  if (kind == "relnet") {
    const int variant = mf.header.at("variant").get<int>();
    RelNetDims dims{mf.header.at("feature_dim").get<std::size_t>(), mf.header.at("embed_dim").get<std::size_t>(),
                    mf.header.at("hidden_dim").get<std::size_t>(), mf.header.at("image_dim").get<std::size_t>()};
    std::optional<PCAModel> pca;
    if (variant == 1) {
      pca = stored_pca(mf);
      if (!pca) fail(ErrorCode::corrupt, "RelNet1 model file lacks its PCA tensors");
    }
    RelNetModel m(variant, dims, SymbolVocab(mf.header.at("tokens").get<std::vector<std::string>>()),
                  step_one_mode_from_string(mf.header.at("step_one").get<std::string>()), std::move(pca));
    for (auto* p : m.params()) mf.restore(*p);
    return m;
  }
  fail(ErrorCode::corrupt, "unknown model kind '" + kind + "'");
}

inline AnyModel load_model(const std::string& path) { return load_model(read_model_file(path)); }

}  // namespace qrel
