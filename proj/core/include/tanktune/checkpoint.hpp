#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>

namespace tanktune {

// Named-tensor text container used for training checkpoints. Format:
//
//   tanktune-checkpoint v1
//   scalar <name> <value>
//   tensor <name> <n>
//   <n whitespace-separated values>
//
// Entries are sorted by name so files are reproducible.
class TensorStore {
 public:
  void put(const std::string& name, const Eigen::VectorXd& v);
  void put_scalar(const std::string& name, double v);

  bool has(const std::string& name) const;
  // Throws if missing or if the stored length differs from expected.
  Eigen::VectorXd get(const std::string& name, Eigen::Index expected) const;
  Eigen::VectorXd get_any(const std::string& name) const;
  double get_scalar(const std::string& name) const;

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::map<std::string, Eigen::VectorXd> tensors_;
  std::map<std::string, double> scalars_;
};

}  // namespace tanktune
