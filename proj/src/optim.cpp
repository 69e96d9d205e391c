#include "lps/optim.hpp"

#include <cmath>
#include <sstream>

namespace lps {

void ParamStore::add(std::string name, Vector init) {
  if (contains(name)) throw UsageError("ParamStore: duplicate parameter group '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(init));
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& [n, _] : entries_)
    if (n == name) return true;
  return false;
}

const Vector& ParamStore::find(std::string_view name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw UsageError("ParamStore: no parameter group '" + std::string(name) + "'");
}

const Vector& ParamStore::get(std::string_view name) const { return find(name); }

void ParamStore::set(std::string_view name, const Vector& values) {
  auto& target = const_cast<Vector&>(find(name));
  if (target.size() != values.size()) {
    std::ostringstream os;
    os << "ParamStore: group '" << name << "' has " << target.size() << " entries, got " << values.size();
    throw UsageError(os.str());
  }
  target = values;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [n, _] : entries_) out.push_back(n);
  return out;
}

AdamState AdamState::for_size(Eigen::Index n, double lr) {
  AdamState s;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  s.lr = lr;
  return s;
}

void adam_step(Vector& params, const Vector& grads, AdamState& state, std::string_view group) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    std::ostringstream os;
    os << "adam_step: shape mismatch in group '" << group << "'";
    throw UsageError(os.str());
  }
  if (!grads.allFinite()) {
    std::ostringstream os;
    os << "adam_step: non-finite gradient in group '" << group << "'";
    throw TrainingError(os.str());
  }
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

double clip_global_norm(std::span<Vector* const> grads, double max_norm) {
  double sq = 0.0;
  for (const Vector* g : grads) sq += g->squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Vector* g : grads) *g *= scale;
  }
  return norm;
}

}  // namespace lps
