#include "ion/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ion/tensor.hpp"

namespace ion {

namespace {
constexpr const char* kMagic = "ion-checkpoint";
constexpr int kVersion = 1;
}  // namespace

void ParamRegistry::add(const std::string& name, std::vector<int> shape, std::vector<double>* values) {
  check(values != nullptr, "ParamRegistry::add: null values");
  size_t expect = 1;
  for (int d : shape) expect *= static_cast<size_t>(d);
  check(values->size() == expect, "ParamRegistry::add: shape does not match value count for " + name);
  for (const ParamEntry& e : entries_) check(e.name != name, "ParamRegistry::add: duplicate name " + name);
  ParamEntry entry;
  entry.name = name;
  entry.shape = std::move(shape);
  entry.values = values;
  entry.grad.assign(values->size(), 0.0);
  entries_.push_back(std::move(entry));
}

ParamEntry* ParamRegistry::find(const std::string& name) {
  for (ParamEntry& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

size_t ParamRegistry::total_values() const {
  size_t n = 0;
  for (const ParamEntry& e : entries_) n += e.values->size();
  return n;
}

void ParamRegistry::zero_grads() {
  for (ParamEntry& e : entries_) e.grad.assign(e.grad.size(), 0.0);
}

double ParamRegistry::grad_norm() const {
  double ss = 0.0;
  for (const ParamEntry& e : entries_) {
    for (double g : e.grad) ss += g * g;
  }
  return std::sqrt(ss);
}

double ParamRegistry::clip_grad_norm(double threshold) {
  double norm = grad_norm();
  if (norm > threshold) {
    double scale = threshold / norm;
    for (ParamEntry& e : entries_) {
      for (double& g : e.grad) g *= scale;
    }
  }
  return norm;
}

void ParamRegistry::save(std::ostream& os) const {
  os << kMagic << " " << kVersion << "\n";
  char buf[32];
  for (const ParamEntry& e : entries_) {
    os << "param " << e.name << " " << e.shape.size();
    for (int d : e.shape) os << " " << d;
    os << "\n";
    for (size_t i = 0; i < e.values->size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", (*e.values)[i]);
      if (i) os << ' ';
      os << buf;
    }
    os << "\n";
  }
  os << "end\n";
}

void ParamRegistry::save_file(const std::string& path) const {
  std::ofstream os(path);
  check(os.good(), "ParamRegistry::save_file: cannot open " + path);
  save(os);
  check(os.good(), "ParamRegistry::save_file: write failed for " + path);
}

void ParamRegistry::load(std::istream& is) {
  std::string magic;
  int version = -1;
  is >> magic >> version;
  check(magic == kMagic, "checkpoint: bad magic '" + magic + "'");
  check(version == kVersion, "checkpoint: unsupported version " + std::to_string(version));
  size_t loaded = 0;
  std::string tok;
  while (is >> tok) {
    if (tok == "end") break;
    check(tok == "param", "checkpoint: expected 'param', got '" + tok + "'");
    std::string name;
    size_t ndim = 0;
    is >> name >> ndim;
    std::vector<int> shape(ndim);
    for (size_t i = 0; i < ndim; ++i) is >> shape[i];
    ParamEntry* entry = find(name);
    check(entry != nullptr, "checkpoint: unknown parameter '" + name + "'");
    check(entry->shape == shape, "checkpoint: shape mismatch for '" + name + "'");
    for (double& v : *entry->values) {
      check(static_cast<bool>(is >> v), "checkpoint: truncated values for '" + name + "'");
    }
    ++loaded;
  }
  check(tok == "end", "checkpoint: missing 'end' marker");
  check(loaded == entries_.size(), "checkpoint: parameter count mismatch (" + std::to_string(loaded) + " loaded, " +
                                       std::to_string(entries_.size()) + " registered)");
}

void ParamRegistry::load_file(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), "ParamRegistry::load_file: cannot open " + path);
  load(is);
}

}  // namespace ion
