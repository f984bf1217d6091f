#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "stochsym/expr.hpp"

namespace stochsym {

/// Default number of sample points of a vanishing test.
inline constexpr std::size_t kZeroSamples = 64;
/// Default relative tolerance of a vanishing test.
inline constexpr double kZeroTolerance = 1e-9;

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Finitary stand-in for an open set M of R^n: an axis-aligned sampling box
/// minus a neighbourhood of the zero sets of the exclusion expressions.
///
/// A point p belongs to the domain when it lies in the box and
/// |g(p)| >= margin for every exclusion g. The margin defaults to 1e-3 of the
/// box diagonal.
class Domain {
 public:
  Domain() = default;
  Domain(std::vector<Interval> box, std::vector<Expression> exclusions = {}, double margin = 0.0);

  /// The box [-half_width, half_width]^n without exclusions.
  static Domain cube(std::size_t n, double half_width);

  std::size_t dimension() const noexcept { return box_.size(); }
  const std::vector<Interval>& box() const noexcept { return box_; }
  const std::vector<Expression>& exclusions() const noexcept { return exclusions_; }
  double margin() const noexcept { return margin_; }
  double diagonal() const noexcept;

  bool contains(std::span<const double> point) const;

  /// Stable hash of box, exclusions and margin; seeds the sample sequence.
  std::uint64_t hash() const;

  /// count deterministic low-discrepancy points of the domain: a shifted
  /// Halton sequence (shift derived from hash()) filtered by contains().
  /// Row-major, count x dimension. Throws DomainError if the domain is
  /// (numerically) empty.
  std::vector<double> sample_points(std::size_t count = kZeroSamples) const;

 private:
  std::vector<Interval> box_;
  std::vector<Expression> exclusions_;
  std::shared_ptr<const std::vector<Tape>> exclusion_tapes_;
  double margin_ = 0.0;
};

/// Outcome of a sampled vanishing test.
struct ZeroTest {
  bool zero = false;
  /// Largest |e(p)| over defined sample points.
  double worst = 0.0;
  /// Largest |e(p)| / (1 + scale(p)), the quantity compared with the tolerance.
  double worst_relative = 0.0;
  std::size_t defined_points = 0;
};

/// Probabilistic identity test: e is declared identically zero on the domain
/// iff |e(p)| <= tolerance * (1 + scale(p)) at every defined sample point,
/// where scale(p) is the largest absolute subterm value of e at p. Throws
/// UndecidableError when e is undefined at every sample point.
ZeroTest zero_test(const Expression& e, const Domain& domain, std::size_t samples = kZeroSamples,
                   double tolerance = kZeroTolerance);

bool is_zero(const Expression& e, const Domain& domain);

}  // namespace stochsym
