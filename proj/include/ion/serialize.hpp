#ifndef ION_SERIALIZE_HPP_
#define ION_SERIALIZE_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace ion {

// Named view into a parameter tensor owned by a layer struct. Registration
// order is the canonical order for checkpoints and gradient flattening.
struct ParamEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<double>* values = nullptr;
  std::vector<double> grad;  // owned accumulator, same length as *values
};

class ParamRegistry {
 public:
  void add(const std::string& name, std::vector<int> shape, std::vector<double>* values);

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  ParamEntry* find(const std::string& name);

  size_t total_values() const;
  void zero_grads();

  // Global L2 norm of all accumulated gradients.
  double grad_norm() const;
  // Rescales every gradient so the global norm equals `threshold` when it
  // exceeded it; returns the pre-clip norm.
  double clip_grad_norm(double threshold);

  // Versioned text checkpoint: `ion-checkpoint 1`, then per parameter a
  // header line `param <name> <ndim> <dims...>` and one line of values
  // printed with 17 significant digits (lossless double round-trip).
  void save(std::ostream& os) const;
  void save_file(const std::string& path) const;
  // Strict load: every stored name/shape must match a registered entry.
  void load(std::istream& is);
  void load_file(const std::string& path);

 private:
  std::vector<ParamEntry> entries_;
};

}  // namespace ion

#endif  // ION_SERIALIZE_HPP_
