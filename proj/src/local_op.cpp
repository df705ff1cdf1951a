#include "tweezersim/local_op.hpp"

#include <stdexcept>

#include "tweezersim/errors.hpp"

namespace tweezersim {

LocalOp::LocalOp(std::size_t dim) : dim_(dim), block_of_(dim) {
  blocks_.reserve(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    Block b;
    b.a = b.b = i;
    blocks_.push_back(b);
    block_of_[i] = i;
  }
}

void LocalOp::set_single(std::size_t a, Complex phase) {
  auto& blk = blocks_.at(block_of_.at(a));
  if (!blk.single()) throw std::logic_error("LocalOp::set_single on a paired index");
  blk.m[0] = phase;
}

void LocalOp::set_pair(std::size_t a, std::size_t b, const std::array<Complex, 4>& m) {
  if (a == b || a >= dim_ || b >= dim_) throw std::logic_error("LocalOp::set_pair: bad indices");
  const std::size_t ia = block_of_[a];
  const std::size_t ib = block_of_[b];
  if (!blocks_[ia].single() || !blocks_[ib].single())
    throw std::logic_error("LocalOp::set_pair: index already paired");
  // Reuse slot ia for the pair, retire slot ib by moving the last block into it.
  blocks_[ia].a = a;
  blocks_[ia].b = b;
  blocks_[ia].m = m;
  block_of_[b] = ia;
  if (ib != blocks_.size() - 1) {
    blocks_[ib] = blocks_.back();
    block_of_[blocks_[ib].a] = ib;
    block_of_[blocks_[ib].b] = ib;
  }
  blocks_.pop_back();
}

void LocalOp::apply(std::span<Complex> v) const {
  if (v.size() != dim_) throw std::logic_error("LocalOp::apply: dimension mismatch");
  apply_strided(v.data(), 1);
}

void LocalOp::apply_strided(Complex* v, std::size_t stride) const {
  for (const auto& blk : blocks_) {
    Complex& x = v[blk.a * stride];
    if (blk.single()) {
      x *= blk.m[0];
      continue;
    }
    Complex& y = v[blk.b * stride];
    const Complex nx = blk.m[0] * x + blk.m[1] * y;
    const Complex ny = blk.m[2] * x + blk.m[3] * y;
    x = nx;
    y = ny;
  }
}

LocalOp LocalOp::then(const LocalOp& after) const {
  if (after.dim_ != dim_) throw std::logic_error("LocalOp::then: dimension mismatch");
  LocalOp out = *this;
  for (auto& blk : out.blocks_) {
    const auto& o = after.blocks_[after.block_of_[blk.a]];
    if (blk.single()) {
      if (!o.single()) throw std::logic_error("LocalOp::then: block partitions differ");
      blk.m[0] = o.m[0] * blk.m[0];
      continue;
    }
    if (o.single() || o.a != blk.a || o.b != blk.b)
      throw std::logic_error("LocalOp::then: block partitions differ");
    const auto& p = blk.m;
    const auto& q = o.m;
    blk.m = {q[0] * p[0] + q[1] * p[2], q[0] * p[1] + q[1] * p[3],
             q[2] * p[0] + q[3] * p[2], q[2] * p[1] + q[3] * p[3]};
  }
  return out;
}

Eigen::MatrixXcd LocalOp::dense() const {
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
  for (const auto& blk : blocks_) {
    const auto a = static_cast<Eigen::Index>(blk.a);
    const auto b = static_cast<Eigen::Index>(blk.b);
    if (blk.single()) {
      u(a, a) = blk.m[0];
      continue;
    }
    u(a, a) = blk.m[0];
    u(a, b) = blk.m[1];
    u(b, a) = blk.m[2];
    u(b, b) = blk.m[3];
  }
  return u;
}

}  // namespace tweezersim
