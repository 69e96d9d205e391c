#ifndef LPS_OPTIM_HPP
#define LPS_OPTIM_HPP

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lps/diff.hpp"

namespace lps {

// Named flat parameter vectors. Names are unique and sizes fixed once added.
class ParamStore {
 public:
  void add(std::string name, Vector init);
  bool contains(std::string_view name) const;
  const Vector& get(std::string_view name) const;
  // Replaces the values of an existing entry; the size must not change.
  void set(std::string_view name, const Vector& values);
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }

 private:
  const Vector& find(std::string_view name) const;

  std::vector<std::pair<std::string, Vector>> entries_;
};

struct AdamState {
  Vector m;
  Vector v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_size(Eigen::Index n, double lr);
};

// One bias-corrected Adam update descending on `grads` (the gradient of the
// quantity being minimised; pass the negated gradient to maximise).
void adam_step(Vector& params, const Vector& grads, AdamState& state, std::string_view group);

// Rescales the blocks in place so their joint L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_global_norm(std::span<Vector* const> grads, double max_norm);

}  // namespace lps

#endif
