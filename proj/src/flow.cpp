#include "stochsym/flow.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "stochsym/errors.hpp"
#include "stochsym/io_format.hpp"

namespace stochsym {

std::size_t FlowResult::surviving() const {
  std::size_t count = 0;
  for (const FlowSample& s : samples) count += s.exited ? 0 : 1;
  return count;
}

namespace {

/// Right-hand side of the flow system in the packed layout
/// [x (n) | B (m*m) | eta | J (n*n) | H (n^3)].
class FlowSystem {
 public:
  FlowSystem(const InfinitesimalTransformation& V, bool variational)
      : n_(V.n), m_(V.m), variational_(variational) {
    std::vector<Expression> outputs = V.Y;
    outputs.insert(outputs.end(), V.C.entries().begin(), V.C.entries().end());
    outputs.push_back(V.tau);
    if (variational_) {
      const ExprMatrix DY = jacobian(V.Y, n_);
      outputs.insert(outputs.end(), DY.entries().begin(), DY.entries().end());
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t l = 0; l < n_; ++l)
          for (std::size_t p = 0; p < n_; ++p) outputs.push_back(differentiate(DY(i, l), p));
    }
    tape_ = Tape(outputs);
    values_.resize(outputs.size());
  }

  std::size_t size() const { return n_ + m_ * m_ + 1 + (variational_ ? n_ * n_ + n_ * n_ * n_ : 0); }

  /// Returns false when a coefficient is undefined at the current position.
  bool derivative(const std::vector<double>& s, std::vector<double>& ds) {
    if (!tape_.evaluate(std::span<const double>(s.data(), n_), values_)) return false;
    const double* Y = values_.data();
    const double* C = Y + n_;
    const double tau = C[m_ * m_];
    const double* B = s.data() + n_;
    double* dB = ds.data() + n_;
    for (std::size_t i = 0; i < n_; ++i) ds[i] = Y[i];
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < m_; ++j) {
        double v = 0.0;
        for (std::size_t k = 0; k < m_; ++k) v += C[i * m_ + k] * B[k * m_ + j];
        dB[i * m_ + j] = v;
      }
    }
    const std::size_t eta_at = n_ + m_ * m_;
    ds[eta_at] = tau * s[eta_at];
    if (!variational_) return true;

    const double* DY = C + m_ * m_ + 1;
    const double* D2Y = DY + n_ * n_;
    const double* J = s.data() + eta_at + 1;
    const double* H = J + n_ * n_;
    double* dJ = ds.data() + eta_at + 1;
    double* dH = dJ + n_ * n_;
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double v = 0.0;
        for (std::size_t l = 0; l < n; ++l) v += DY[i * n + l] * J[l * n + j];
        dJ[i * n + j] = v;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          double v = 0.0;
          for (std::size_t l = 0; l < n; ++l) {
            v += DY[i * n + l] * H[(l * n + j) * n + k];
            for (std::size_t p = 0; p < n; ++p) v += D2Y[(i * n + l) * n + p] * J[l * n + j] * J[p * n + k];
          }
          dH[(i * n + j) * n + k] = v;
        }
      }
    }
    return true;
  }

  std::vector<double> initial(std::span<const double> p) const {
    std::vector<double> s(size(), 0.0);
    for (std::size_t i = 0; i < n_; ++i) s[i] = p[i];
    for (std::size_t i = 0; i < m_; ++i) s[n_ + i * m_ + i] = 1.0;
    s[n_ + m_ * m_] = 1.0;
    if (variational_) {
      double* J = s.data() + n_ + m_ * m_ + 1;
      for (std::size_t i = 0; i < n_; ++i) J[i * n_ + i] = 1.0;
    }
    return s;
  }

  FlowSample unpack(std::span<const double> p, const std::vector<double>& s) const {
    FlowSample out;
    out.point.assign(p.begin(), p.end());
    out.phi.assign(s.begin(), s.begin() + n_);
    out.B.assign(s.begin() + n_, s.begin() + n_ + m_ * m_);
    const std::size_t eta_at = n_ + m_ * m_;
    out.eta = s[eta_at];
    if (variational_) {
      out.J.assign(s.begin() + eta_at + 1, s.begin() + eta_at + 1 + n_ * n_);
      out.H.assign(s.begin() + eta_at + 1 + n_ * n_, s.end());
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t m_;
  bool variational_;
  Tape tape_;
  std::vector<double> values_;
};

}  // namespace

FlowResult flow(const InfinitesimalTransformation& V, double a, std::span<const double> grid, const Domain& domain,
                const FlowOptions& options) {
  const std::size_t n = V.n;
  if (domain.dimension() != n) throw DimensionError("domain dimension differs from the vector field dimension");
  if (grid.size() % n != 0) throw DimensionError("grid size is not a multiple of the dimension");

  FlowResult result;
  result.a = a;
  result.n = n;
  result.m = V.m;
  const double nominal = options.step > 0.0 ? options.step : 1e-3 * std::fabs(a);
  result.steps = a == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(std::fabs(a) / nominal - 1e-9));
  const double h = result.steps == 0 ? 0.0 : a / static_cast<double>(result.steps);
  result.step = std::fabs(h);

  FlowSystem system(V, options.variational);
  const std::size_t size = system.size();
  std::vector<double> k1(size), k2(size), k3(size), k4(size), tmp(size);

  for (std::size_t g = 0; g < grid.size() / n; ++g) {
    const std::span<const double> p = grid.subspan(g * n, n);
    std::vector<double> s = system.initial(p);
    bool exited = !domain.contains(p);
    double exit_at = 0.0;
    for (std::size_t step = 0; step < result.steps && !exited; ++step) {
      auto stage = [&](const std::vector<double>& base, const std::vector<double>& slope, double c,
                       std::vector<double>& out) {
        for (std::size_t i = 0; i < size; ++i) tmp[i] = base[i] + c * slope[i];
        return system.derivative(tmp, out);
      };
      bool ok = system.derivative(s, k1);
      ok = ok && stage(s, k1, h / 2, k2);
      ok = ok && stage(s, k2, h / 2, k3);
      ok = ok && stage(s, k3, h, k4);
      if (ok) {
        for (std::size_t i = 0; i < size; ++i) s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
      if (!ok || !domain.contains(std::span<const double>(s.data(), n))) {
        exited = true;
        exit_at = h * static_cast<double>(step + 1);
      }
    }
    if (exited && !options.drop_exits) throw FlowExitError("flow left the domain", exit_at);
    FlowSample sample = system.unpack(p, s);
    sample.exited = exited;
    sample.exit_parameter = exit_at;
    result.samples.push_back(std::move(sample));
  }
  return result;
}

void write_csv(std::ostream& out, const FlowResult& result) {
  out << "a";
  for (std::size_t i = 1; i <= result.n; ++i) out << ",p" << i;
  for (std::size_t i = 1; i <= result.n; ++i) out << ",phi" << i;
  for (std::size_t i = 1; i <= result.m; ++i)
    for (std::size_t j = 1; j <= result.m; ++j) out << ",B" << i << j;
  out << ",eta\n";
  for (const FlowSample& s : result.samples) {
    if (s.exited) continue;
    out << format_double(result.a);
    for (double v : s.point) out << ',' << format_double(v);
    for (double v : s.phi) out << ',' << format_double(v);
    for (double v : s.B) out << ',' << format_double(v);
    out << ',' << format_double(s.eta) << '\n';
  }
}

}  // namespace stochsym
