// SPDX-License-Identifier: Apache-2.0
#include "cdi3d/serialize.hpp"

#include <fstream>

#include "cdi3d/errors.hpp"

namespace cdi3d {

namespace {

long shape_count(const std::vector<long>& shape) {
  long n = 1;
  for (long s : shape) {
    if (s <= 0) throw IoError("tensor shape must be positive");
    n *= s;
  }
  return n;
}

}  // namespace

void TensorStore::add(const std::string& name, std::vector<long> shape,
                      std::vector<double> data) {
  if (shape_count(shape) != static_cast<long>(data.size()))
    throw IoError("TensorStore::add: shape/data mismatch for " + name);
  if (has(name)) throw IoError("TensorStore::add: duplicate tensor " + name);
  tensors.push_back({name, std::move(shape), std::move(data)});
}

void TensorStore::add_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<double> data(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      data[static_cast<size_t>(r) * m.cols() + c] = m(r, c);
  add(name, {static_cast<long>(m.rows()), static_cast<long>(m.cols())},
      std::move(data));
}

void TensorStore::add_vector(const std::string& name, const Eigen::VectorXd& v) {
  add(name, {static_cast<long>(v.size())},
      std::vector<double>(v.data(), v.data() + v.size()));
}

bool TensorStore::has(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

const NamedTensor& TensorStore::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw IoError("TensorStore: missing tensor " + name);
}

Eigen::MatrixXd TensorStore::matrix(const std::string& name) const {
  const NamedTensor& t = get(name);
  if (t.shape.size() != 2)
    throw IoError("TensorStore: tensor " + name + " is not 2-d");
  Eigen::MatrixXd m(t.shape[0], t.shape[1]);
  for (long r = 0; r < t.shape[0]; ++r)
    for (long c = 0; c < t.shape[1]; ++c)
      m(r, c) = t.data[static_cast<size_t>(r) * t.shape[1] + c];
  return m;
}

Eigen::VectorXd TensorStore::vector(const std::string& name) const {
  const NamedTensor& t = get(name);
  if (t.shape.size() != 1)
    throw IoError("TensorStore: tensor " + name + " is not 1-d");
  return Eigen::Map<const Eigen::VectorXd>(t.data.data(),
                                           static_cast<long>(t.data.size()));
}

void save_store(const std::string& base_path, const TensorStore& store) {
  nlohmann::json sidecar;
  sidecar["format"] = "cdi3d-tensors-v1";
  sidecar["meta"] = store.meta;
  sidecar["tensors"] = nlohmann::json::array();

  std::ofstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw IoError("save_store: cannot open " + base_path + ".bin");
  long offset = 0;
  for (const auto& t : store.tensors) {
    sidecar["tensors"].push_back({{"name", t.name},
                                  {"shape", t.shape},
                                  {"offset", offset},
                                  {"count", static_cast<long>(t.data.size())}});
    bin.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    offset += static_cast<long>(t.data.size());
  }
  if (!bin) throw IoError("save_store: write failed for " + base_path + ".bin");

  std::ofstream js(base_path + ".json");
  if (!js) throw IoError("save_store: cannot open " + base_path + ".json");
  js << sidecar.dump(2) << '\n';
  if (!js) throw IoError("save_store: write failed for " + base_path + ".json");
}

TensorStore load_store(const std::string& base_path) {
  std::ifstream js(base_path + ".json");
  if (!js) throw IoError("load_store: cannot open " + base_path + ".json");
  nlohmann::json sidecar;
  try {
    js >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_store: bad sidecar json: " + std::string(e.what()));
  }
  if (sidecar.value("format", "") != "cdi3d-tensors-v1")
    throw IoError("load_store: unrecognized format in " + base_path + ".json");

  std::ifstream bin(base_path + ".bin", std::ios::binary);
  if (!bin) throw IoError("load_store: cannot open " + base_path + ".bin");

  TensorStore store;
  store.meta = sidecar.value("meta", nlohmann::json::object());
  for (const auto& e : sidecar.at("tensors")) {
    NamedTensor t;
    t.name = e.at("name").get<std::string>();
    t.shape = e.at("shape").get<std::vector<long>>();
    const long count = e.at("count").get<long>();
    if (count != shape_count(t.shape))
      throw IoError("load_store: inconsistent count for " + t.name);
    t.data.resize(count);
    bin.seekg(e.at("offset").get<long>() * static_cast<long>(sizeof(double)));
    bin.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!bin) throw IoError("load_store: truncated payload for " + t.name);
    store.tensors.push_back(std::move(t));
  }
  return store;
}

namespace {

void add_mlp(TensorStore& store, const std::string& prefix, const Mlp& mlp) {
  for (size_t l = 0; l < mlp.weights.size(); ++l) {
    store.add_matrix(prefix + ".w" + std::to_string(l), mlp.weights[l]);
    store.add_vector(prefix + ".b" + std::to_string(l), mlp.biases[l]);
  }
}

Mlp load_mlp(const TensorStore& store, const std::string& prefix) {
  Mlp mlp;
  for (int l = 0;; ++l) {
    const std::string wname = prefix + ".w" + std::to_string(l);
    if (!store.has(wname)) break;
    mlp.weights.push_back(store.matrix(wname));
    mlp.biases.push_back(store.vector(prefix + ".b" + std::to_string(l)));
  }
  if (mlp.weights.empty())
    throw IoError("checkpoint: no layers under " + prefix);
  return mlp;
}

}  // namespace

void save_field_params(const std::string& base_path, const FieldParams& fp) {
  TensorStore store;
  store.meta["kind"] = "field";
  store.meta["resolution"] = fp.planes.resolution;
  store.meta["features"] = fp.planes.features;
  store.add_matrix("plane.xy", fp.planes.planes[0]);
  store.add_matrix("plane.xz", fp.planes.planes[1]);
  store.add_matrix("plane.yz", fp.planes.planes[2]);
  add_mlp(store, "decoder", fp.decoder.mlp);
  save_store(base_path, store);
}

FieldParams load_field_params(const std::string& base_path) {
  const TensorStore store = load_store(base_path);
  if (store.meta.value("kind", "") != "field")
    throw IoError("load_field_params: not a field checkpoint: " + base_path);
  FieldParams fp;
  fp.planes.resolution = store.meta.at("resolution").get<int>();
  fp.planes.features = store.meta.at("features").get<int>();
  fp.planes.planes[0] = store.matrix("plane.xy");
  fp.planes.planes[1] = store.matrix("plane.xz");
  fp.planes.planes[2] = store.matrix("plane.yz");
  const long rr = static_cast<long>(fp.planes.resolution) * fp.planes.resolution;
  for (const auto& p : fp.planes.planes)
    if (p.rows() != rr || p.cols() != fp.planes.features)
      throw IoError("load_field_params: plane shape mismatch");
  fp.decoder.mlp = load_mlp(store, "decoder");
  return fp;
}

void save_dvi_checkpoint(const std::string& base_path, const DviCheckpoint& ck) {
  TensorStore store;
  store.meta["kind"] = "dvi";
  store.meta["image_h"] = ck.denoiser.image_h;
  store.meta["image_w"] = ck.denoiser.image_w;
  store.meta["image_c"] = ck.denoiser.image_c;
  store.meta["t_embed_dim"] = ck.denoiser.t_embed_dim;
  store.meta["cond_dim"] = ck.denoiser.cond_dim;
  store.meta["steps"] = ck.schedule.steps;
  add_mlp(store, "denoiser", ck.denoiser.mlp);
  store.add_matrix("encoder.weight", ck.encoder.weight);
  store.add_vector("encoder.bias", ck.encoder.bias);
  store.add("schedule.beta", {ck.schedule.steps}, ck.schedule.beta);
  save_store(base_path, store);
}

DviCheckpoint load_dvi_checkpoint(const std::string& base_path) {
  const TensorStore store = load_store(base_path);
  if (store.meta.value("kind", "") != "dvi")
    throw IoError("load_dvi_checkpoint: not a dvi checkpoint: " + base_path);
  DviCheckpoint ck;
  ck.denoiser.image_h = store.meta.at("image_h").get<int>();
  ck.denoiser.image_w = store.meta.at("image_w").get<int>();
  ck.denoiser.image_c = store.meta.at("image_c").get<int>();
  ck.denoiser.t_embed_dim = store.meta.at("t_embed_dim").get<int>();
  ck.denoiser.cond_dim = store.meta.at("cond_dim").get<int>();
  ck.denoiser.mlp = load_mlp(store, "denoiser");
  ck.encoder.weight = store.matrix("encoder.weight");
  ck.encoder.bias = store.vector("encoder.bias");
  ck.encoder.image_h = ck.denoiser.image_h;
  ck.encoder.image_w = ck.denoiser.image_w;
  ck.encoder.image_c = ck.denoiser.image_c;
  const NamedTensor& beta = store.get("schedule.beta");
  ck.schedule.steps = static_cast<int>(beta.data.size());
  ck.schedule.beta = beta.data;
  ck.schedule.alpha.resize(ck.schedule.steps);
  ck.schedule.alpha_bar.resize(ck.schedule.steps);
  double prod = 1.0;
  for (int t = 0; t < ck.schedule.steps; ++t) {
    ck.schedule.alpha[t] = 1.0 - ck.schedule.beta[t];
    prod *= ck.schedule.alpha[t];
    ck.schedule.alpha_bar[t] = prod;
  }
  return ck;
}

}  // namespace cdi3d
