#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "augmix/metrics.hpp"

namespace augmix {

/// Baseline table JSON:
///   {"corruptions": {name: [e1..e5]}, "perturbations": {name: fp}}
/// with all rates as fractions in (0,1].
inline BaselineErrorTable read_baseline_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad baseline JSON in " + path + ": " + e.what());
  }
  BaselineErrorTable table;
  if (doc.contains("corruptions")) {
    for (const auto& [name, rates] : doc.at("corruptions").items()) {
      if (!rates.is_array() || rates.size() != 5)
        throw std::runtime_error("baseline corruption " + name +
                                 " must list 5 severities");
      std::array<double, 5> errors{};
      for (int s = 0; s < 5; ++s) {
        errors[s] = rates.at(s).get<double>();
        if (!(errors[s] > 0.0 && errors[s] <= 1.0))
          throw std::runtime_error("baseline rate for " + name +
                                   " outside (0,1]");
      }
      table.corruptions[name] = errors;
    }
  }
  if (doc.contains("perturbations")) {
    for (const auto& [name, rate] : doc.at("perturbations").items()) {
      const double fp = rate.get<double>();
      if (!(fp > 0.0 && fp <= 1.0))
        throw std::runtime_error("baseline flip rate for " + name +
                                 " outside (0,1]");
      table.perturbations[name] = fp;
    }
  }
  return table;
}

inline void write_baseline_json(const BaselineErrorTable& table,
                                const std::string& path) {
  nlohmann::json doc;
  doc["corruptions"] = nlohmann::json::object();
  doc["perturbations"] = nlohmann::json::object();
  for (const auto& [name, errors] : table.corruptions)
    doc["corruptions"][name] = errors;
  for (const auto& [name, fp] : table.perturbations)
    doc["perturbations"][name] = fp;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace augmix
