#include "nmpc/lbfgs.hpp"

#include <stdexcept>

namespace nmpc {

LbfgsBuffer::LbfgsBuffer(int dim, int memory, double cautious_eps)
    : dim_(dim), memory_(memory), eps_(cautious_eps) {
  if (dim < 1) {
    throw std::invalid_argument("lbfgs buffer dimension must be positive");
  }
  if (memory < 0) {
    throw std::invalid_argument("lbfgs memory must be nonnegative");
  }
  slots_.resize(memory_);
  for (auto& p : slots_) {
    p.s.resize(dim_);
    p.y.resize(dim_);
  }
  alpha_.resize(memory_);
}

bool LbfgsBuffer::push(const Vector& s, const Vector& y) {
  if (memory_ == 0) {
    return false;
  }
  if (s.size() != dim_ || y.size() != dim_) {
    throw std::invalid_argument("lbfgs pair has wrong dimension");
  }
  const double sy = s.dot(y);
  if (!(sy > eps_ * s.norm() * y.norm())) {
    return false;
  }
  Pair& slot = slots_[head_];
  slot.s = s;
  slot.y = y;
  slot.rho = 1.0 / sy;
  head_ = (head_ + 1) % memory_;
  if (count_ < memory_) {
    ++count_;
  }
  return true;
}

const LbfgsBuffer::Pair& LbfgsBuffer::from_newest(int offset) const {
  const int idx = (head_ - 1 - offset + 2 * memory_) % memory_;
  return slots_[idx];
}

void LbfgsBuffer::apply(Vector& q) const {
  if (count_ == 0) {
    return;
  }
  // first loop, newest to oldest
  for (int i = 0; i < count_; ++i) {
    const Pair& p = from_newest(i);
    alpha_[i] = p.rho * p.s.dot(q);
    q.noalias() -= alpha_[i] * p.y;
  }
  const Pair& newest = from_newest(0);
  q *= newest.s.dot(newest.y) / newest.y.squaredNorm();
  // second loop, oldest to newest
  for (int i = count_ - 1; i >= 0; --i) {
    const Pair& p = from_newest(i);
    const double beta = p.rho * p.y.dot(q);
    q.noalias() += (alpha_[i] - beta) * p.s;
  }
}

void LbfgsBuffer::clear() {
  count_ = 0;
  head_ = 0;
}

Vector lbfgs_direction(const LbfgsBuffer& buffer, const Vector& r, double gamma) {
  if (buffer.empty()) {
    return Vector(-gamma * r);
  }
  Vector d = r;
  buffer.apply(d);
  return Vector(-d);
}

}  // namespace nmpc
