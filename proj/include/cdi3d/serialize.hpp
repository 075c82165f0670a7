// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "cdi3d/dvi.hpp"
#include "cdi3d/reconstruct.hpp"

namespace cdi3d {

struct NamedTensor {
  std::string name;
  std::vector<long> shape;
  std::vector<double> data;  // row-major
};

// Checkpoint container: <base>.bin holds the concatenated float64 payload
// (little endian), <base>.json records names, shapes, offsets and free-form
// metadata.
struct TensorStore {
  std::vector<NamedTensor> tensors;
  nlohmann::json meta = nlohmann::json::object();

  void add(const std::string& name, std::vector<long> shape,
           std::vector<double> data);
  void add_matrix(const std::string& name, const Eigen::MatrixXd& m);
  void add_vector(const std::string& name, const Eigen::VectorXd& v);

  bool has(const std::string& name) const;
  const NamedTensor& get(const std::string& name) const;  // IoError if absent
  Eigen::MatrixXd matrix(const std::string& name) const;
  Eigen::VectorXd vector(const std::string& name) const;
};

void save_store(const std::string& base_path, const TensorStore& store);
TensorStore load_store(const std::string& base_path);

void save_field_params(const std::string& base_path, const FieldParams& fp);
FieldParams load_field_params(const std::string& base_path);

// Denoiser + condition encoder + schedule parameters in one checkpoint.
struct DviCheckpoint {
  DenoiserParams denoiser;
  ConditionEncoder encoder;
  DiffusionSchedule schedule;
};

void save_dvi_checkpoint(const std::string& base_path, const DviCheckpoint& ck);
DviCheckpoint load_dvi_checkpoint(const std::string& base_path);

}  // namespace cdi3d
