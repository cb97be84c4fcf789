#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "augmix/classifier.hpp"

namespace augmix {

/// Checkpoint schema: {"schema_version": 1, "num_classes": K,
/// "input_dim": D, "weights": [K*D row-major], "bias": [K]}.
inline void save_model_json(const LinearModel& model, const std::string& path) {
  validate_model(model);
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["num_classes"] = model.num_classes;
  doc["input_dim"] = model.input_dim;
  doc["weights"] = model.weights;
  doc["bias"] = model.bias;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << doc.dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline LinearModel load_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad model JSON in " + path + ": " + e.what());
  }
  LinearModel model;
  try {
    model.num_classes = doc.at("num_classes").get<int>();
    model.input_dim = doc.at("input_dim").get<int>();
    model.weights = doc.at("weights").get<std::vector<double>>();
    model.bias = doc.at("bias").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad model JSON in " + path + ": " + e.what());
  }
  validate_model(model);
  return model;
}

}  // namespace augmix
