#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace robust_rrt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A rollout produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError() : Error("dynamics diverged") {}
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Axis-aligned interval vector. A component with lo == hi is a singleton.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw Error("box bounds have different dimensions");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
        throw Error("box bounds must be finite");
      if (lo[i] > hi[i]) throw Error("box is empty (lo > hi)");
    }
  }

  static Box point(const Vec& p) { return Box(p, p); }
  static Box zeros(Eigen::Index n) { return Box(Vec::Zero(n), Vec::Zero(n)); }

  Eigen::Index dim() const { return lo.size(); }
  Vec center() const { return 0.5 * (lo + hi); }
  Vec width() const { return hi - lo; }
  bool is_singleton() const { return (hi - lo).cwiseAbs().maxCoeff() == 0.0 || dim() == 0; }

  bool contains(const Vec& x, double tol = 0.0) const {
    if (x.size() != dim()) return false;
    for (Eigen::Index i = 0; i < dim(); ++i)
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
  }

  Vec clamp(const Vec& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

  double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }
};

// ---------------------------------------------------------------------------
// Random streams
//
// Every random quantity is drawn from a stream derived from a key
// (master seed, purpose, a, b). A stream is a SplitMix64 sequence, so the
// values seen by one particle never depend on which worker ran it or on how
// many other particles were propagated before it.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Purpose tags keep planning, validation and test draws disjoint.
enum class StreamDomain : std::uint64_t {
  Planner = 1,
  ParticleInit = 2,
  Propagation = 3,
  Validation = 4,
  Probe = 5,
  Study = 6,
};

inline std::uint64_t stream_key(std::uint64_t seed, StreamDomain domain, std::uint64_t a = 0,
                                std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(domain));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return h;
}

/// SplitMix64 generator. Models UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t key = 0) : state_(key) {}
  Stream(std::uint64_t seed, StreamDomain domain, std::uint64_t a = 0, std::uint64_t b = 0)
      : state_(stream_key(seed, domain, a, b)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n) {
    // Lemire's multiply-shift; the bias is below 2^-40 for the sizes used here.
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>((*this)()) * static_cast<unsigned __int128>(n)) >> 64);
  }

  Vec uniform(const Box& box) {
    Vec v(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) v[i] = uniform(box.lo[i], box.hi[i]);
    return v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace robust_rrt
