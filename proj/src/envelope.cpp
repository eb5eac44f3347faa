#include "gbsde/envelope.hpp"

#include "gbsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

namespace gbsde {

// ---------------------------------------------------------------------------
// Modulus

Modulus Modulus::power(double alpha, double c, double growth_L) {
  Modulus m;
  m.kind = Kind::Power;
  m.alpha = alpha;
  m.c = c;
  m.growth_L = growth_L;
  m.validate();
  return m;
}

Modulus Modulus::linear(double c, double growth_L) {
  Modulus m;
  m.kind = Kind::Linear;
  m.c = c;
  m.growth_L = growth_L;
  m.validate();
  return m;
}

Modulus Modulus::tabulated(std::vector<std::pair<double, double>> points, double growth_L) {
  Modulus m;
  m.kind = Kind::Tabulated;
  m.table = std::move(points);
  m.growth_L = growth_L;
  m.validate();
  return m;
}

void Modulus::validate() const {
  if (!(growth_L >= 0.0) || !std::isfinite(growth_L)) throw InvalidArgument("Modulus: growth_L must be finite and >= 0");
  switch (kind) {
    case Kind::Power:
      if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("Modulus: power exponent must lie in (0, 1]");
      [[fallthrough]];
    case Kind::Linear:
      if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("Modulus: c must be finite and >= 0");
      break;
    case Kind::Tabulated:
      if (table.size() < 2 || table.front().first != 0.0 || table.front().second != 0.0) {
        throw InvalidArgument("Modulus: table must start at (0, 0) and hold at least two points");
      }
      for (std::size_t i = 1; i < table.size(); ++i) {
        if (!(table[i].first > table[i - 1].first)) throw InvalidArgument("Modulus: table abscissae must increase");
        if (table[i].second < table[i - 1].second) throw InvalidArgument("Modulus: table values must be nondecreasing");
      }
      break;
  }
  // Sampled axioms: subadditivity and linear growth on a log-spaced grid.
  std::vector<double> rs;
  for (double r = 1e-6; r <= 1e6; r *= 1.5) rs.push_back(r);
  for (double r : rs) {
    const double v = (*this)(r);
    if (v > growth_L * (1.0 + r) * (1.0 + 1e-12) + 1e-15) {
      std::ostringstream os;
      os << "Modulus: phi(" << r << ") = " << v << " exceeds growth_L (1 + r)";
      throw InvalidArgument(os.str());
    }
  }
  for (std::size_t i = 0; i < rs.size(); i += 3) {
    for (std::size_t j = i; j < rs.size(); j += 5) {
      const double lhs = (*this)(rs[i] + rs[j]);
      const double rhs = (*this)(rs[i]) + (*this)(rs[j]);
      if (lhs > rhs * (1.0 + 1e-12) + 1e-15) throw InvalidArgument("Modulus: not subadditive on sampled pairs");
    }
  }
}

double Modulus::operator()(double r) const {
  if (r < 0.0 || std::isnan(r)) throw InvalidArgument("modulus_eval: r must be >= 0");
  if (r == 0.0) return 0.0;
  switch (kind) {
    case Kind::Power:
      return c * std::pow(r, alpha);
    case Kind::Linear:
      return c * r;
    case Kind::Tabulated: {
      auto it = std::upper_bound(table.begin(), table.end(), r,
                                 [](double v, const std::pair<double, double>& p) { return v < p.first; });
      const auto& hi = it == table.end() ? table.back() : *it;
      const auto& lo = it == table.end() ? table[table.size() - 2] : *(it - 1);
      const double slope = (hi.second - lo.second) / (hi.first - lo.first);
      return lo.second + slope * (r - lo.first);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// ScalarGenerator

ScalarGenerator ScalarGenerator::constant(double value) {
  return ScalarGenerator{Expr::constant(value), 0.0, Modulus::linear(0.0, 0.0), 0.0};
}

void ScalarGenerator::check_metadata(double x_lo, double x_hi, double t_hi, unsigned samples) const {
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> ut(0.0, std::max(t_hi, 0.0));
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  std::uniform_real_distribution<double> uy(-10.0, 10.0);
  std::uniform_real_distribution<double> uz(-20.0, 20.0);
  std::uniform_real_distribution<double> ulog(-8.0, 1.0);
  auto fail = [&](const char* what, double t, double x, double y, double z) {
    std::ostringstream os;
    os << "generator '" << body.to_string() << "' violates declared " << what << " at (t=" << t << ", x=" << x
       << ", y=" << y << ", z=" << z << ")";
    throw InvalidArgument(os.str());
  };
  for (unsigned k = 0; k < samples; ++k) {
    const double t = ut(rng), x = ux(rng), y = uy(rng);
    // Mix wide and near-zero z samples so small-increment moduli are probed.
    const double z = (k % 2 == 0) ? uz(rng) : std::copysign(std::pow(10.0, ulog(rng)), uz(rng));
    const double v = (*this)(t, x, y, z);
    const double v0 = (*this)(t, x, 0.0, 0.0);
    const double tol = 1e-9 * (1.0 + std::abs(v) + std::abs(v0));
    if (std::abs(v - v0) > growth_L * (1.0 + std::abs(y) + std::abs(z)) + tol) fail("linear growth", t, x, y, z);

    const double y2 = uy(rng);
    const double vy = (*this)(t, x, y2, z);
    if (std::abs(v - vy) > lip_y * std::abs(y - y2) + tol + 1e-9 * std::abs(vy)) fail("Lipschitz constant in y", t, x, y, z);

    const double dz = (k % 3 == 0) ? std::pow(10.0, ulog(rng)) : uz(rng);
    const double z2 = z + dz;
    const double vz = (*this)(t, x, y, z2);
    if (std::abs(v - vz) > modulus_z(std::abs(dz)) + tol + 1e-9 * std::abs(vz)) fail("modulus in z", t, x, y, z);
  }
}

// ---------------------------------------------------------------------------
// Pointwise envelopes

double search_radius(double L, double n, double y, double z) {
  if (!(n > L)) throw InvalidArgument("search_radius: envelope level n must exceed L");
  return 2.0 * L * (1.0 + std::abs(y) + std::abs(z)) / (n - L);
}

double envelope_grid_error(const Modulus& m, double n, double step) { return m(step) + n * step; }

double default_envelope_step(double radius) { return std::min(1e-3, radius / 1000.0); }

namespace {

template <typename Better>
double envelope_search(const ScalarGenerator& gen, double n, double t, double x, double y, double z, double step,
                       double sign, Better better) {
  if (!(n > gen.growth_L)) throw InvalidArgument("envelope: level n must exceed the generator growth constant L");
  if (step < 0.0 || std::isnan(step)) throw InvalidArgument("envelope: step must be > 0");
  if (!gen.depends_on_z()) return gen(t, x, y, z);
  const double radius = search_radius(gen.growth_L, n, y, z);
  if (step == 0.0) step = default_envelope_step(radius);
  if (radius == 0.0) return gen(t, x, y, z);
  // Even number of cells so that q = z is a grid point.
  std::size_t cells = static_cast<std::size_t>(std::ceil(2.0 * radius / step));
  cells += cells % 2;
  const double h = 2.0 * radius / static_cast<double>(cells);
  double best = gen(t, x, y, z);
  for (std::size_t k = 0; k <= cells; ++k) {
    const double q = z - radius + h * static_cast<double>(k);
    const double v = gen(t, x, y, q) + sign * n * std::abs(z - q);
    if (better(v, best)) best = v;
  }
  return best;
}

}  // namespace

double lower_envelope(const ScalarGenerator& gen, double n, double t, double x, double y, double z, double step) {
  return envelope_search(gen, n, t, x, y, z, step, +1.0, [](double a, double b) { return a < b; });
}

double upper_envelope(const ScalarGenerator& gen, double n, double t, double x, double y, double z, double step) {
  return envelope_search(gen, n, t, x, y, z, step, -1.0, [](double a, double b) { return a > b; });
}

double envelope_gap_bound(const Modulus& m, double L, double n) {
  if (!(n > L)) throw InvalidArgument("envelope_gap_bound: level n must exceed L");
  return m(2.0 * L / (n - L));
}

// ---------------------------------------------------------------------------
// ZLattice

std::shared_ptr<const ZLattice> ZLattice::graded(double z_max, double h_min, double rel) {
  if (!(z_max > 0.0) || !(h_min > 0.0) || !(rel > 0.0) || !std::isfinite(z_max)) {
    throw InvalidArgument("ZLattice: z_max, h_min and rel must be positive");
  }
  std::shared_ptr<ZLattice> lat(new ZLattice());
  lat->h_min_ = h_min;
  lat->rel_ = rel;
  lat->scale_ = h_min / rel;
  lat->log_ratio_ = std::log1p(rel);
  const auto half = static_cast<std::size_t>(std::ceil(std::log1p(z_max / lat->scale_) / lat->log_ratio_));
  lat->half_ = half;
  lat->nodes_.resize(2 * half + 1);
  for (std::size_t j = 0; j <= half; ++j) {
    const double v = lat->scale_ * std::expm1(static_cast<double>(j) * lat->log_ratio_);
    lat->nodes_[half + j] = v;
    lat->nodes_[half - j] = -v;
  }
  lat->nodes_[half] = 0.0;
  return lat;
}

std::size_t ZLattice::locate(double z) const {
  const std::size_t last = nodes_.size() - 2;
  if (z <= nodes_.front()) return 0;
  if (z >= nodes_.back()) return last;
  const double w = std::abs(z);
  const double jf = std::log1p(w / scale_) / log_ratio_;
  long long j;
  if (z >= 0.0) {
    j = static_cast<long long>(half_) + static_cast<long long>(std::floor(jf));
  } else {
    j = static_cast<long long>(half_) - static_cast<long long>(std::ceil(jf));
  }
  j = std::clamp<long long>(j, 0, static_cast<long long>(last));
  while (j > 0 && nodes_[static_cast<std::size_t>(j)] > z) --j;
  while (static_cast<std::size_t>(j) < last && nodes_[static_cast<std::size_t>(j) + 1] <= z) ++j;
  return static_cast<std::size_t>(j);
}

// ---------------------------------------------------------------------------
// ZProfile

ZProfile::ZProfile(std::shared_ptr<const ZLattice> lattice, std::vector<double> values)
    : lattice_(std::move(lattice)), values_(std::move(values)) {
  if (!lattice_ || values_.size() != lattice_->size()) throw InvalidArgument("ZProfile: size mismatch");
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("ZProfile: non-finite value");
  }
  build_trees();
}

ZProfile ZProfile::sample(std::shared_ptr<const ZLattice> lattice, const std::function<double(double)>& f) {
  std::vector<double> v(lattice->size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(lattice->node(j));
  return ZProfile(std::move(lattice), std::move(v));
}

void ZProfile::build_trees() {
  const std::size_t n = values_.size();
  max_tree_.assign(2 * n, 0.0);
  min_tree_.assign(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) max_tree_[n + i] = min_tree_[n + i] = values_[i];
  for (std::size_t i = n - 1; i >= 1; --i) {
    max_tree_[i] = std::max(max_tree_[2 * i], max_tree_[2 * i + 1]);
    min_tree_[i] = std::min(min_tree_[2 * i], min_tree_[2 * i + 1]);
  }
}

double ZProfile::tree_query(const std::vector<double>& tree, std::size_t l, std::size_t r, bool want_max) const {
  // Inclusive node range [l, r].
  double best = want_max ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  if (r < l) return best;
  if (r - l < 16) {
    for (std::size_t i = l; i <= r; ++i) best = want_max ? std::max(best, values_[i]) : std::min(best, values_[i]);
    return best;
  }
  const std::size_t n = values_.size();
  for (std::size_t lo = l + n, hi = r + n + 1; lo < hi; lo >>= 1, hi >>= 1) {
    if (lo & 1) {
      best = want_max ? std::max(best, tree[lo]) : std::min(best, tree[lo]);
      ++lo;
    }
    if (hi & 1) {
      --hi;
      best = want_max ? std::max(best, tree[hi]) : std::min(best, tree[hi]);
    }
  }
  return best;
}

double ZProfile::operator()(double z) const {
  const std::size_t j = lattice_->locate(z);
  const double z0 = lattice_->node(j), z1 = lattice_->node(j + 1);
  const double w = (z - z0) / (z1 - z0);
  return values_[j] + w * (values_[j + 1] - values_[j]);
}

double ZProfile::max_on(double a, double b) const {
  double best = std::max((*this)(a), (*this)(b));
  const std::size_t ja = lattice_->locate(a) + 1;
  const std::size_t jb = lattice_->locate(b);
  return std::max(best, tree_query(max_tree_, ja, jb, true));
}

double ZProfile::min_on(double a, double b) const {
  double best = std::min((*this)(a), (*this)(b));
  const std::size_t ja = lattice_->locate(a) + 1;
  const std::size_t jb = lattice_->locate(b);
  return std::min(best, tree_query(min_tree_, ja, jb, false));
}

ZProfile ZProfile::lower_envelope(double n) const {
  const auto& z = lattice_->nodes();
  std::vector<double> v = values_;
  for (std::size_t j = 1; j < v.size(); ++j) v[j] = std::min(v[j], v[j - 1] + n * (z[j] - z[j - 1]));
  for (std::size_t j = v.size() - 1; j-- > 0;) v[j] = std::min(v[j], v[j + 1] + n * (z[j + 1] - z[j]));
  return ZProfile(lattice_, std::move(v));
}

ZProfile ZProfile::upper_envelope(double n) const {
  const auto& z = lattice_->nodes();
  std::vector<double> v = values_;
  for (std::size_t j = 1; j < v.size(); ++j) v[j] = std::max(v[j], v[j - 1] - n * (z[j] - z[j - 1]));
  for (std::size_t j = v.size() - 1; j-- > 0;) v[j] = std::max(v[j], v[j + 1] - n * (z[j + 1] - z[j]));
  return ZProfile(lattice_, std::move(v));
}

double ZProfile::lipschitz() const {
  const auto& z = lattice_->nodes();
  double best = 0.0;
  for (std::size_t j = 1; j < values_.size(); ++j) {
    best = std::max(best, std::abs(values_[j] - values_[j - 1]) / (z[j] - z[j - 1]));
  }
  return best;
}

}  // namespace gbsde
