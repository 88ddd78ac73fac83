#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>

namespace irstensor {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Index = Eigen::Index;

// Operands with incompatible or invalid shapes.
class ShapeError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The training design cannot support the requested operation: infeasible
// dimensions, lost column rank, or a non-orthogonal design where an
// orthogonal one is required.
class DesignError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerically invalid input (zero matrix, singular information matrix, ...).
class NumericsError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense 3-way complex tensor with dims (d1, d2, d3). Entry (i, j, k) lives at
// flat offset i + d1*j + d1*d2*k, so frontal slice k is a contiguous
// column-major d1 x d2 block and the mode-1 unfolding is a free remap.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index d1, Index d2, Index d3) : d1_(d1), d2_(d2), d3_(d3) {
    if (d1 < 1 || d2 < 1 || d3 < 1)
      throw ShapeError("Tensor3: dimensions must be positive");
    data_ = ComplexVector::Zero(d1 * d2 * d3);
  }

  Index dim1() const { return d1_; }
  Index dim2() const { return d2_; }
  Index dim3() const { return d3_; }
  Index size() const { return data_.size(); }
  bool same_dims(const Tensor3& o) const {
    return d1_ == o.d1_ && d2_ == o.d2_ && d3_ == o.d3_;
  }

  Complex& operator()(Index i, Index j, Index k) {
    return data_[i + d1_ * j + d1_ * d2_ * k];
  }
  const Complex& operator()(Index i, Index j, Index k) const {
    return data_[i + d1_ * j + d1_ * d2_ * k];
  }

  // Frontal slice k as a d1 x d2 matrix view.
  Eigen::Map<const ComplexMatrix> slice(Index k) const {
    return {data_.data() + d1_ * d2_ * k, d1_, d2_};
  }
  Eigen::Map<ComplexMatrix> slice(Index k) {
    return {data_.data() + d1_ * d2_ * k, d1_, d2_};
  }

  ComplexVector& data() { return data_; }
  const ComplexVector& data() const { return data_; }

  double squared_norm() const { return data_.squaredNorm(); }

  Tensor3 operator+(const Tensor3& o) const {
    require_same(o);
    Tensor3 r(*this);
    r.data_ += o.data_;
    return r;
  }
  Tensor3 operator-(const Tensor3& o) const {
    require_same(o);
    Tensor3 r(*this);
    r.data_ -= o.data_;
    return r;
  }
  Tensor3& operator*=(double s) {
    data_ *= s;
    return *this;
  }

 private:
  void require_same(const Tensor3& o) const {
    if (!same_dims(o)) throw ShapeError("Tensor3: dimension mismatch");
  }
  Index d1_ = 0, d2_ = 0, d3_ = 0;
  ComplexVector data_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derive a child seed from a base seed and a list of stream coordinates
// (sweep index, grid index, run index, ...). Order-sensitive by design.
inline std::uint64_t mix_seed(std::uint64_t base,
                              std::initializer_list<std::uint64_t> words) {
  std::uint64_t s = splitmix64(base);
  for (std::uint64_t w : words) s = splitmix64(s ^ splitmix64(w + 0x9E3779B97F4A7C15ull));
  return s;
}

// Deterministic RNG: mt19937_64 with explicit variate recipes, so seeded
// streams are identical across standard libraries (std::normal_distribution
// et al. are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Circularly-symmetric complex normal, unit variance: modulus-squared is
  // Exp(1), phase is uniform.
  Complex cnormal() {
    double r = std::sqrt(-std::log1p(-uniform()));
    double phi = 2.0 * 3.14159265358979323846 * uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  // Unit-modulus entry with uniform phase.
  Complex unit_phase() {
    double phi = 2.0 * 3.14159265358979323846 * uniform();
    return {std::cos(phi), std::sin(phi)};
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Column-major fill order (deterministic stream layout).
  ComplexMatrix cnormal_matrix(Index rows, Index cols) {
    ComplexMatrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = cnormal();
    return m;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace irstensor
