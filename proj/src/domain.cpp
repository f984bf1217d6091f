#include "stochsym/domain.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <string>

#include "stochsym/errors.hpp"

namespace stochsym {

namespace {

constexpr std::array<unsigned, 16> kPrimes{2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void fnv1a(std::uint64_t& h, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

Domain::Domain(std::vector<Interval> box, std::vector<Expression> exclusions, double margin)
    : box_(std::move(box)), exclusions_(std::move(exclusions)), margin_(margin) {
  if (box_.empty()) throw DomainError("domain needs at least one coordinate");
  for (const Interval& iv : box_) {
    if (!(iv.high > iv.low)) throw DomainError("sampling box must have positive volume");
  }
  for (const Expression& g : exclusions_) {
    if (g.arity() > box_.size()) throw DimensionError("exclusion expression exceeds domain dimension");
  }
  if (margin_ <= 0.0) margin_ = 1e-3 * diagonal();
  auto tapes = std::make_shared<std::vector<Tape>>();
  for (const Expression& g : exclusions_) tapes->emplace_back(g);
  exclusion_tapes_ = std::move(tapes);
}

Domain Domain::cube(std::size_t n, double half_width) {
  return Domain(std::vector<Interval>(n, Interval{-half_width, half_width}));
}

double Domain::diagonal() const noexcept {
  double s = 0.0;
  for (const Interval& iv : box_) s += (iv.high - iv.low) * (iv.high - iv.low);
  return std::sqrt(s);
}

bool Domain::contains(std::span<const double> point) const {
  if (point.size() < box_.size()) return false;
  for (std::size_t i = 0; i < box_.size(); ++i) {
    if (!(point[i] >= box_[i].low && point[i] <= box_[i].high)) return false;
  }
  if (!exclusion_tapes_) return true;
  for (const Tape& t : *exclusion_tapes_) {
    double v = 0.0;
    if (!t.evaluate(point, std::span<double>(&v, 1))) return false;
    if (std::fabs(v) < margin_) return false;
  }
  return true;
}

std::uint64_t Domain::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::size_t n = box_.size();
  fnv1a(h, &n, sizeof n);
  for (const Interval& iv : box_) {
    fnv1a(h, &iv.low, sizeof iv.low);
    fnv1a(h, &iv.high, sizeof iv.high);
  }
  for (const Expression& g : exclusions_) {
    const std::string s = to_string(g, n);
    fnv1a(h, s.data(), s.size());
  }
  fnv1a(h, &margin_, sizeof margin_);
  return h;
}

std::vector<double> Domain::sample_points(std::size_t count) const {
  const std::size_t n = box_.size();
  if (n > kPrimes.size()) throw DimensionError("sampling supports at most 16 dimensions");

  std::uint64_t state = hash();
  std::vector<double> shift(n);
  for (double& s : shift) s = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;

  std::vector<double> points;
  points.reserve(count * n);
  std::vector<double> p(n);
  const std::uint64_t max_index = 4096 * (count + 1);
  for (std::uint64_t i = 1; points.size() < count * n && i < max_index; ++i) {
    for (std::size_t d = 0; d < n; ++d) {
      double u = radical_inverse(i, kPrimes[d]) + shift[d];
      u -= std::floor(u);
      p[d] = box_[d].low + (box_[d].high - box_[d].low) * u;
    }
    if (contains(p)) points.insert(points.end(), p.begin(), p.end());
  }
  if (points.size() < count * n) throw DomainError("could not draw enough sample points from the domain");
  return points;
}

ZeroTest zero_test(const Expression& e, const Domain& domain, std::size_t samples, double tolerance) {
  ZeroTest result;
  if (e.is_constant()) {
    result.worst = std::fabs(e.node().value);
    result.worst_relative = result.worst / (1.0 + result.worst);
    result.zero = result.worst_relative <= tolerance;
    result.defined_points = samples;
    return result;
  }
  if (e.arity() > domain.dimension()) throw DimensionError("expression exceeds domain dimension");
  const std::vector<double> pts = domain.sample_points(samples);
  const std::size_t n = domain.dimension();
  const Tape tape(e);
  result.zero = true;
  for (std::size_t k = 0; k < samples; ++k) {
    double v = 0.0;
    double scale = 0.0;
    if (!tape.evaluate(std::span<const double>(pts.data() + k * n, n), std::span<double>(&v, 1), scale)) continue;
    ++result.defined_points;
    const double rel = std::fabs(v) / (1.0 + scale);
    result.worst = std::max(result.worst, std::fabs(v));
    result.worst_relative = std::max(result.worst_relative, rel);
    if (rel > tolerance) result.zero = false;
  }
  if (result.defined_points == 0) throw UndecidableError("expression undefined at every sample point");
  return result;
}

bool is_zero(const Expression& e, const Domain& domain) { return zero_test(e, domain).zero; }

}  // namespace stochsym
