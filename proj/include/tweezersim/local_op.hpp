#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tweezersim/core_state.hpp"

namespace tweezersim {

/// Block-sparse operator on one atom's local (level, n) space. Every
/// carrier, sideband, and rotation acting on a single atom decomposes into
/// disjoint 1x1 and 2x2 blocks, and this keeps them in that form.
class LocalOp {
 public:
  struct Block {
    std::size_t a = 0;
    std::size_t b = 0;  // == a for a 1x1 block
    // Row-major 2x2 [[aa, ab], [ba, bb]]; a 1x1 block uses only m[0].
    std::array<Complex, 4> m{Complex{1.0}, Complex{0.0}, Complex{0.0}, Complex{1.0}};
    bool single() const noexcept { return a == b; }
  };

  LocalOp() = default;
  explicit LocalOp(std::size_t dim);  // identity

  static LocalOp identity(std::size_t dim) { return LocalOp(dim); }

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  /// Replace the action on basis pair (a, b); both indices must currently be
  /// identity singletons.
  void set_pair(std::size_t a, std::size_t b, const std::array<Complex, 4>& m);
  void set_single(std::size_t a, Complex phase);

  /// Applies to a contiguous local vector.
  void apply(std::span<Complex> v) const;
  /// Applies to the strided fiber v[offset + i * stride].
  void apply_strided(Complex* v, std::size_t stride) const;

  /// this * other; both must share the block partition or one must be diagonal.
  LocalOp then(const LocalOp& after) const;

  Eigen::MatrixXcd dense() const;

 private:
  std::size_t dim_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::size_t> block_of_;  // basis index -> block position
};

}  // namespace tweezersim
