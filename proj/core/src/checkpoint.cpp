#include "tanktune/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "tanktune/csv.hpp"

namespace tanktune {

void TensorStore::put(const std::string& name, const Eigen::VectorXd& v) {
  tensors_[name] = v;
}

void TensorStore::put_scalar(const std::string& name, double v) { scalars_[name] = v; }

bool TensorStore::has(const std::string& name) const {
  return tensors_.count(name) != 0;
}

Eigen::VectorXd TensorStore::get(const std::string& name, Eigen::Index expected) const {
  const Eigen::VectorXd v = get_any(name);
  if (v.size() != expected)
    throw std::runtime_error("checkpoint: tensor '" + name + "' has wrong length");
  return v;
}

Eigen::VectorXd TensorStore::get_any(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

double TensorStore::get_scalar(const std::string& name) const {
  auto it = scalars_.find(name);
  if (it == scalars_.end())
    throw std::runtime_error("checkpoint: missing scalar '" + name + "'");
  return it->second;
}

void TensorStore::save(const std::string& path) const {
  std::ostringstream out;
  out << "tanktune-checkpoint v1\n";
  for (const auto& [name, value] : scalars_)
    out << "scalar " << name << ' ' << format_double(value) << "\n";
  for (const auto& [name, v] : tensors_) {
    out << "tensor " << name << ' ' << v.size() << "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out << format_double(v(i));
      out << (i + 1 == v.size() ? '\n' : ' ');
    }
    if (v.size() == 0) out << "\n";
  }
  atomic_write_text(path, out.str());
}

void TensorStore::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "tanktune-checkpoint" || version != "v1")
    throw std::runtime_error("checkpoint: unrecognized header in " + path);
  tensors_.clear();
  scalars_.clear();
  std::string kind;
  while (in >> kind) {
    std::string name;
    if (kind == "scalar") {
      double v;
      in >> name >> v;
      scalars_[name] = v;
    } else if (kind == "tensor") {
      Eigen::Index n;
      in >> name >> n;
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) in >> v(i);
      tensors_[name] = std::move(v);
    } else {
      throw std::runtime_error("checkpoint: bad record kind '" + kind + "'");
    }
    if (!in && !in.eof()) throw std::runtime_error("checkpoint: parse error in " + path);
  }
}

}  // namespace tanktune
