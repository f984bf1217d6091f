#include "stochsym/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "stochsym/errors.hpp"
#include "stochsym/io_format.hpp"
#include "stochsym/transform.hpp"

namespace stochsym {

// ---------------------------------------------------------------------------
// Random numbers

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = M0 * c[0];
    const std::uint64_t p1 = M1 * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

void standard_normals(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::span<double> out) {
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (std::size_t block = 0; 2 * block < out.size(); ++block) {
    const auto r = philox4x32({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(block),
                               static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)},
                              key);
    const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
    const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[2 * block] = radius * std::cos(angle);
    if (2 * block + 1 < out.size()) out[2 * block + 1] = radius * std::sin(angle);
  }
}

// ---------------------------------------------------------------------------
// Euler-Maruyama

PathSimulator::PathSimulator(const Sde& sde, SimConfig config) : sde_(sde), config_(std::move(config)) {
  if (!(config_.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (config_.x0.size() != sde_.n) throw DimensionError("initial point has the wrong dimension");
  if (!sde_.domain.contains(config_.x0)) throw DomainError("initial point lies outside the domain");
  std::vector<Expression> coeffs = sde_.mu;
  coeffs.insert(coeffs.end(), sde_.sigma.entries().begin(), sde_.sigma.entries().end());
  tape_ = Tape(coeffs);
}

PathBundle PathSimulator::operator()(std::size_t path) const {
  const std::size_t n = sde_.n, m = sde_.m;
  const SimConfig& config = config_;
  const std::size_t substeps = std::max<std::size_t>(config.substeps, 1);

  PathBundle out;
  out.n = n;
  out.m = m;
  out.dt = config.dt;
  out.steps = static_cast<std::size_t>(std::llround(config.horizon / config.dt));
  out.X.reserve((out.steps + 1) * n);
  out.W.reserve((out.steps + 1) * m);
  out.X.insert(out.X.end(), config.x0.begin(), config.x0.end());
  out.W.insert(out.W.end(), m, 0.0);

  std::vector<double> values(n + n * m), dW(m), z(m), next(n);
  const double root = std::sqrt(config.dt / static_cast<double>(substeps));
  out.stop = out.steps;
  for (std::size_t k = 0; k < out.steps; ++k) {
    const std::span<const double> x(out.X.data() + k * n, n);
    std::fill(dW.begin(), dW.end(), 0.0);
    for (std::size_t s = 0; s < substeps; ++s) {
      standard_normals(config.seed, path, k * substeps + s, z);
      for (std::size_t a = 0; a < m; ++a) dW[a] += root * z[a];
    }
    bool alive = tape_.evaluate(x, values);
    if (alive) {
      const double* mu = values.data();
      const double* sigma = mu + n;
      for (std::size_t i = 0; i < n; ++i) {
        double v = x[i] + mu[i] * config.dt;
        for (std::size_t a = 0; a < m; ++a) v += sigma[i * m + a] * dW[a];
        next[i] = v;
      }
      alive = sde_.domain.contains(next);
    }
    if (!alive) {
      out.stop = k;
      out.killed = true;
      break;
    }
    out.X.insert(out.X.end(), next.begin(), next.end());
    for (std::size_t a = 0; a < m; ++a) out.W.push_back(out.W[k * m + a] + dW[a]);
  }
  return out;
}

PathBundle euler_maruyama_path(const Sde& sde, const SimConfig& config, std::size_t path) {
  return PathSimulator(sde, config)(path);
}

std::vector<PathBundle> euler_maruyama(const Sde& sde, const SimConfig& config) {
  if (config.paths == 0) throw std::invalid_argument("path count must be at least 1");
  const PathSimulator simulate(sde, config);
  std::vector<PathBundle> out;
  out.reserve(config.paths);
  for (std::size_t p = 0; p < config.paths; ++p) out.push_back(simulate(p));
  return out;
}

// ---------------------------------------------------------------------------
// Process transformation

namespace {

/// Interpolation weights closer than this to a node snap onto it.
constexpr double kSnap = 1e-9;

}  // namespace

PathBundle process_transform(const FiniteTransformation& T, const PathBundle& path) {
  const std::size_t n = path.n, m = path.m, K = path.stop;
  if (T.n != n || T.m != m) throw DimensionError("transformation and path dimensions differ");
  if (K == 0) throw std::invalid_argument("cannot transform a path without steps");

  std::vector<Expression> outputs = T.phi;
  outputs.insert(outputs.end(), T.B.entries().begin(), T.B.entries().end());
  outputs.push_back(T.eta);
  const Tape tape(outputs);

  std::vector<double> beta(K + 1, 0.0), Y((K + 1) * n), Wp((K + 1) * m, 0.0), values(outputs.size());
  for (std::size_t k = 0; k <= K; ++k) {
    if (!tape.evaluate(path.x(k), values)) throw DomainError("transformation undefined along the path");
    std::copy(values.begin(), values.begin() + n, Y.begin() + k * n);
    if (k == K) break;
    const double* B = values.data() + n;
    const double eta = values[n + m * m];
    if (!(eta > 0.0)) throw DomainError("eta is not positive along the path");
    beta[k + 1] = beta[k] + eta * path.dt;
    const double root = std::sqrt(eta);
    for (std::size_t a = 0; a < m; ++a) {
      double v = 0.0;
      for (std::size_t b = 0; b < m; ++b) v += B[a * m + b] * (path.W[(k + 1) * m + b] - path.W[k * m + b]);
      Wp[(k + 1) * m + a] = Wp[k * m + a] + root * v;
    }
  }

  PathBundle out;
  out.n = n;
  out.m = m;
  out.steps = K;
  out.stop = K;
  out.killed = path.killed;
  out.dt = beta[K] / static_cast<double>(K);
  out.X.resize((K + 1) * n);
  out.W.resize((K + 1) * m);
  out.clock.resize(K + 1);
  std::size_t k = 0;
  for (std::size_t j = 0; j <= K; ++j) {
    const double t = j == K ? beta[K] : out.time(j);
    while (k + 1 < K && beta[k + 1] < t) ++k;
    double w = (t - beta[k]) / (beta[k + 1] - beta[k]);
    w = std::clamp(w, 0.0, 1.0);
    if (w < kSnap) w = 0.0;
    if (w > 1.0 - kSnap) w = 1.0;
    auto blend = [&](const std::vector<double>& src, std::size_t width, std::vector<double>& dst) {
      for (std::size_t i = 0; i < width; ++i) {
        const double lo = src[k * width + i], hi = src[(k + 1) * width + i];
        dst[j * width + i] = w == 0.0 ? lo : w == 1.0 ? hi : (1.0 - w) * lo + w * hi;
      }
    };
    blend(Y, n, out.X);
    blend(Wp, m, out.W);
    out.clock[j] = (static_cast<double>(k) + w) * path.dt;
  }
  return out;
}

std::optional<PathState> state_at(const PathBundle& path, double t) {
  const double horizon = path.horizon();
  if (t < 0.0 || t > horizon * (1.0 + 1e-12) + 1e-15) return std::nullopt;
  PathState s{std::vector<double>(path.n), std::vector<double>(path.m)};
  if (path.stop == 0) {
    std::copy(path.X.begin(), path.X.begin() + path.n, s.x.begin());
    return s;
  }
  std::size_t k = std::min(static_cast<std::size_t>(t / path.dt), path.stop - 1);
  double w = std::clamp((t - path.time(k)) / path.dt, 0.0, 1.0);
  if (w < kSnap) w = 0.0;
  if (w > 1.0 - kSnap) w = 1.0;
  for (std::size_t i = 0; i < path.n; ++i) s.x[i] = (1.0 - w) * path.X[k * path.n + i] + w * path.X[(k + 1) * path.n + i];
  for (std::size_t a = 0; a < path.m; ++a) s.w[a] = (1.0 - w) * path.W[k * path.m + a] + w * path.W[(k + 1) * path.m + a];
  return s;
}

double composition_pathwise_deviation(const FiniteTransformation& T1, const FiniteTransformation& T2,
                                      std::span<const PathBundle> paths) {
  const FiniteTransformation composite = compose(T2, T1);
  double worst = 0.0;
  for (const PathBundle& p : paths) {
    if (p.stop == 0) continue;
    const PathBundle direct = process_transform(composite, p);
    const PathBundle iterated = process_transform(T2, process_transform(T1, p));
    for (std::size_t j = 0; j <= direct.stop; ++j) {
      const auto s = state_at(iterated, direct.time(j));
      if (!s) break;
      for (std::size_t i = 0; i < p.n; ++i) worst = std::max(worst, std::fabs(s->x[i] - direct.x(j)[i]));
      for (std::size_t a = 0; a < p.m; ++a) worst = std::max(worst, std::fabs(s->w[a] - direct.w(j)[a]));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Statistics

bool StatsReport::passed() const {
  return !statistics.empty() &&
         std::all_of(statistics.begin(), statistics.end(), [](const Statistic& s) { return s.passed; });
}

double StatsReport::alive_fraction() const {
  return samples_total == 0 ? 0.0 : static_cast<double>(samples_used) / static_cast<double>(samples_total);
}

namespace {

/// Mean and standard error from running sums.
std::pair<double, double> mean_se(double sum, double sq, std::size_t count) {
  const double N = static_cast<double>(count);
  const double mean = sum / N;
  const double var = std::max(0.0, (sq - N * mean * mean) / (N - 1.0));
  return {mean, std::sqrt(var / N)};
}

Statistic within_se(std::string name, double observed, double expected, double se) {
  Statistic s;
  s.name = std::move(name);
  s.observed = observed;
  s.expected = expected;
  s.standard_error = se;
  s.passed = std::fabs(observed - expected) <= kStandardErrors * se;
  return s;
}

}  // namespace

BrownianCheck::BrownianCheck(std::size_t m, double T)
    : m_(m),
      T_(T),
      inc_sum_(m, 0.0),
      inc_sq_(m, 0.0),
      end_sq_sum_(m, 0.0),
      end_sq_sq_(m, 0.0),
      cov_sum_(m * m, 0.0),
      cov_sq_(m * m, 0.0) {}

void BrownianCheck::add(const PathBundle& path) {
  if (path.m != m_) throw DimensionError("path noise dimension differs from the check");
  ++total_;
  const auto end = state_at(path, T_);
  if (!end) return;
  ++used_;
  const std::size_t last = std::min(path.stop, static_cast<std::size_t>(std::floor(T_ / path.dt + 1e-9)));
  std::vector<double> cov(m_ * m_, 0.0);
  for (std::size_t j = 0; j < last; ++j) {
    for (std::size_t a = 0; a < m_; ++a) {
      const double da = path.W[(j + 1) * m_ + a] - path.W[j * m_ + a];
      inc_sum_[a] += da;
      inc_sq_[a] += da * da;
      for (std::size_t b = a + 1; b < m_; ++b) cov[a * m_ + b] += da * (path.W[(j + 1) * m_ + b] - path.W[j * m_ + b]);
    }
  }
  increments_ += last;
  for (std::size_t a = 0; a < m_; ++a) {
    const double q = end->w[a] * end->w[a];
    end_sq_sum_[a] += q;
    end_sq_sq_[a] += q * q;
    for (std::size_t b = a + 1; b < m_; ++b) {
      cov_sum_[a * m_ + b] += cov[a * m_ + b];
      cov_sq_[a * m_ + b] += cov[a * m_ + b] * cov[a * m_ + b];
    }
  }
}

StatsReport BrownianCheck::report() const {
  if (used_ < 100) throw std::invalid_argument("Brownian check needs at least 100 usable paths");
  StatsReport r;
  r.subject = "brownian motion";
  r.samples_used = used_;
  r.samples_total = total_;
  for (std::size_t a = 0; a < m_; ++a) {
    const auto [mean, se] = mean_se(inc_sum_[a], inc_sq_[a], increments_);
    r.statistics.push_back(within_se("increment mean W" + std::to_string(a + 1), mean, 0.0, se));
  }
  for (std::size_t a = 0; a < m_; ++a) {
    const auto [mean, se] = mean_se(end_sq_sum_[a], end_sq_sq_[a], used_);
    r.statistics.push_back(within_se("E[W" + std::to_string(a + 1) + "_T^2]", mean, T_, se));
  }
  for (std::size_t a = 0; a < m_; ++a) {
    for (std::size_t b = a + 1; b < m_; ++b) {
      const auto [mean, se] = mean_se(cov_sum_[a * m_ + b], cov_sq_[a * m_ + b], used_);
      r.statistics.push_back(
          within_se("covariation W" + std::to_string(a + 1) + " W" + std::to_string(b + 1), mean, 0.0, se));
    }
  }
  return r;
}

StatsReport brownian_check(std::span<const PathBundle> paths, double T) {
  if (paths.empty()) throw std::invalid_argument("Brownian check needs at least 100 usable paths");
  BrownianCheck check(paths[0].m, T);
  for (const PathBundle& p : paths) check.add(p);
  return check.report();
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  if (lambda < 1e-3) {
    p = 1.0;
  } else {
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
      p += term;
      if (std::fabs(term) < 1e-12 * std::fabs(p)) break;
      sign = -sign;
    }
    p = std::clamp(2.0 * p, 0.0, 1.0);
  }
  return {d, p};
}

StatsReport two_sample_check(std::span<const double> a, std::span<const double> b, std::size_t dim) {
  if (dim == 0 || a.size() % dim != 0 || b.size() % dim != 0) throw DimensionError("ensemble shape mismatch");
  const std::size_t na = a.size() / dim, nb = b.size() / dim;
  if (na < 1000 || nb < 1000) throw std::invalid_argument("two-sample check needs at least 1000 samples per side");
  StatsReport r;
  r.subject = "two-sample";
  r.samples_used = std::min(na, nb);
  r.samples_total = std::min(na, nb);
  for (std::size_t c = 0; c < dim; ++c) {
    std::vector<double> xa(na), xb(nb);
    for (std::size_t i = 0; i < na; ++i) xa[i] = a[i * dim + c];
    for (std::size_t i = 0; i < nb; ++i) xb[i] = b[i * dim + c];
    auto moments = [](const std::vector<double>& x, int power) {
      double s = 0.0, q = 0.0;
      for (double v : x) {
        const double t = power == 1 ? v : v * v;
        s += t;
        q += t * t;
      }
      return std::pair{s, q};
    };
    const std::string coord = "x" + std::to_string(c + 1);
    for (int power : {1, 2}) {
      const auto [sa, qa] = moments(xa, power);
      const auto [sb, qb] = moments(xb, power);
      const auto [ma, sea] = mean_se(sa, qa, na);
      const auto [mb, seb] = mean_se(sb, qb, nb);
      r.statistics.push_back(within_se((power == 1 ? "mean " : "second moment ") + coord, ma, mb,
                                       std::sqrt(sea * sea + seb * seb)));
    }
    const KsResult ks = ks_two_sample(std::move(xa), std::move(xb));
    Statistic s;
    s.name = "KS " + coord;
    s.observed = ks.statistic;
    s.expected = 0.0;
    s.p_value = ks.p_value;
    s.passed = ks.p_value > kKsLevel;
    r.statistics.push_back(s);
  }
  return r;
}

TransformedEnsemble transformed_ensemble_check(const Sde& sde, const FiniteTransformation& T,
                                               const SimConfig& config, double t) {
  const std::size_t n = sde.n;
  TransformedEnsemble r;
  BrownianCheck noise(sde.m, t);
  const PathSimulator source(sde, config);
  for (std::size_t p = 0; p < config.paths; ++p) {
    const PathBundle q = process_transform(T, source(p));
    noise.add(q);
    if (const auto s = state_at(q, t)) {
      r.transformed.insert(r.transformed.end(), s->x.begin(), s->x.end());
    } else if (!q.killed) {
      ++r.short_paths;
    }
  }
  r.noise = noise.report();
  r.noise.subject = "P_T(W)";

  SimConfig direct = config;
  direct.seed = config.seed + 1;
  direct.horizon = t;
  direct.x0.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) direct.x0[i] = evaluate(T.phi[i], config.x0);
  const PathSimulator target(transform_sde(T, sde), direct);
  for (std::size_t p = 0; p < config.paths; ++p) {
    const PathBundle q = target(p);
    if (q.killed) continue;
    r.direct.insert(r.direct.end(), q.X.end() - n, q.X.end());
  }
  r.comparison = two_sample_check(r.transformed, r.direct, n);
  r.comparison.subject = "P_T(X) vs E_T";
  r.comparison.samples_total = config.paths;
  return r;
}

void write_csv_header(std::ostream& out, std::size_t n, std::size_t m) {
  out << "path,k,t";
  for (std::size_t i = 1; i <= n; ++i) out << ",X" << i;
  for (std::size_t a = 1; a <= m; ++a) out << ",W" << a;
  out << '\n';
}

void write_csv_rows(std::ostream& out, std::size_t index, const PathBundle& b) {
  for (std::size_t k = 0; k <= b.stop; ++k) {
    out << index << ',' << k << ',' << format_double(b.time(k));
    for (double v : b.x(k)) out << ',' << format_double(v);
    for (double v : b.w(k)) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_csv(std::ostream& out, std::span<const PathBundle> paths) {
  write_csv_header(out, paths.empty() ? 0 : paths[0].n, paths.empty() ? 0 : paths[0].m);
  for (std::size_t p = 0; p < paths.size(); ++p) write_csv_rows(out, p, paths[p]);
}

}  // namespace stochsym
