#include "geostore/grid.hpp"

#include "geostore/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

namespace geostore::grid {

AxisGrid::AxisGrid(std::string name, std::vector<double> points) : name_(std::move(name)), points_(std::move(points)) {
  if (points_.empty()) throw DomainError("AxisGrid " + name_ + ": no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i])) throw DomainError("AxisGrid " + name_ + ": non-finite point");
    if (i > 0 && !(points_[i] > points_[i - 1])) {
      throw DomainError("AxisGrid " + name_ + ": points must be strictly increasing");
    }
  }
  mids_.reserve(points_.size() - 1);
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) mids_.push_back(0.5 * (points_[i] + points_[i + 1]));
}

AxisGrid AxisGrid::uniform(std::string name, double lo, double hi, int intervals) {
  if (intervals < 0) throw DomainError("AxisGrid " + name + ": negative interval count");
  if (intervals == 0) return AxisGrid(std::move(name), {0.5 * (lo + hi)});
  if (!(hi > lo)) throw DomainError("AxisGrid " + name + ": degenerate range");
  std::vector<double> pts(static_cast<std::size_t>(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) pts[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / intervals;
  pts.back() = hi;
  return AxisGrid(std::move(name), std::move(pts));
}

int AxisGrid::cell_of(double x) const {
  // First midpoint >= x: cells are closed on the upper side.
  return static_cast<int>(std::lower_bound(mids_.begin(), mids_.end(), x) - mids_.begin());
}

std::vector<double> AxisGrid::edges() const {
  std::vector<double> e;
  e.reserve(points_.size() + 1);
  e.push_back(-kInf);
  e.insert(e.end(), mids_.begin(), mids_.end());
  e.push_back(kInf);
  return e;
}

StateGrid::StateGrid(AxisGrid r, AxisGrid p, std::vector<AxisGrid> y) : r_(std::move(r)), p_(std::move(p)), y_(std::move(y)) {
  y_strides_.resize(y_.size());
  y_size_ = 1;
  for (std::size_t k = 0; k < y_.size(); ++k) {
    y_strides_[k] = y_size_;
    y_size_ *= y_[k].size();
  }
}

void StateGrid::split(std::int64_t m, int& ir, int& ip, std::int64_t& iy) const {
  iy = m / block_size();
  const std::int64_t rest = m % block_size();
  ir = static_cast<int>(rest / p_.size());
  ip = static_cast<int>(rest % p_.size());
}

std::int64_t StateGrid::y_flat(const std::vector<int>& idx) const {
  if (idx.size() != y_.size()) throw DimensionError("StateGrid::y_flat: index rank mismatch");
  std::int64_t f = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) f += idx[k] * y_strides_[k];
  return f;
}

std::vector<int> StateGrid::y_multi(std::int64_t iy) const {
  std::vector<int> idx(y_.size());
  for (std::size_t k = 0; k < y_.size(); ++k) {
    idx[k] = static_cast<int>(iy % y_[k].size());
    iy /= y_[k].size();
  }
  return idx;
}

Vector StateGrid::y_point(std::int64_t iy) const {
  Vector y(static_cast<Eigen::Index>(y_.size()));
  for (std::size_t k = 0; k < y_.size(); ++k) {
    y(static_cast<Eigen::Index>(k)) = y_[k].point(static_cast<int>(iy % y_[k].size()));
    iy /= y_[k].size();
  }
  return y;
}

std::int64_t StateGrid::y_project(const Vector& y) const {
  if (y.size() != static_cast<Eigen::Index>(y_.size())) throw DimensionError("StateGrid: y dimension mismatch");
  std::int64_t f = 0;
  for (std::size_t k = 0; k < y_.size(); ++k) f += y_[k].cell_of(y(static_cast<Eigen::Index>(k))) * y_strides_[k];
  return f;
}

mdp::State StateGrid::state(std::int64_t m) const {
  int ir = 0, ip = 0;
  std::int64_t iy = 0;
  split(m, ir, ip, iy);
  mdp::State x;
  x.r = r_.point(ir);
  x.p = p_.point(ip);
  x.y = y_point(iy);
  return x;
}

StateGrid::Projection StateGrid::project(const mdp::State& x) const {
  const int ir = r_.cell_of(x.r);
  const int ip = p_.cell_of(x.p);
  const std::int64_t iy = y_project(x.y);
  Projection out;
  out.index = flat(ir, ip, iy);
  out.point = state(out.index);
  out.point.f = x.f;
  return out;
}

std::uint64_t StateGrid::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 1099511628211ULL;
    }
  };
  auto axis = [&](const AxisGrid& a) {
    for (char ch : a.name()) mix(static_cast<unsigned char>(ch));
    mix(static_cast<std::uint64_t>(a.size()));
    for (double v : a.points()) mix(std::bit_cast<std::uint64_t>(v));
  };
  axis(r_);
  axis(p_);
  for (const AxisGrid& a : y_) axis(a);
  return h;
}

Envelope simulate_envelope(const mdp::MdpModel& model, int periods, std::uint64_t seed) {
  const mor::GesDynamics& ges = model.ges;
  const Eigen::Index ell = ges.sys.ell;
  const mdp::ConstraintParams& cons = model.cons;
  const RowVector cm = ges.sys.c_m();

  std::array<mor::AffineStep, 3> steps;
  const std::array<Action, 3> acts{Action::ChargeGes, Action::Wait, Action::DischargeGes};
  for (std::size_t k = 0; k < 3; ++k) steps[k] = mor::affine_step(ges, acts[k], model.qg_at(0), model.dt);

  Envelope env{Vector::Constant(ell, kInf), Vector::Constant(ell, -kInf)};
  auto record = [&env](const Vector& y) {
    env.lo = env.lo.cwiseMin(y);
    env.hi = env.hi.cwiseMax(y);
  };
  // Applies action k (0 charge, 1 wait, 2 discharge), waiting instead when
  // the move would leave the GES band.
  auto advance = [&](Vector& y, std::size_t k) {
    Vector next = steps[k].e * y + steps[k].c;
    const double q = cm.dot(next);
    if ((k == 0 && q > cons.q_hi) || (k == 2 && q < cons.q_lo)) next = steps[1].e * y + steps[1].c;
    y = next;
    record(y);
  };

  const std::array<double, 3> starts{cons.q_lo, std::clamp(model.qg_at(0), cons.q_lo, cons.q_hi), cons.q_hi};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_int_distribution<int> hold(1, 12);
  for (double q0 : starts) {
    const Vector y0 = mdp::storage_state(ges, q0);
    record(y0);
    for (std::size_t k = 0; k < 3; ++k) {
      Vector y = y0;
      for (int n = 0; n < periods; ++n) advance(y, k);
    }
    Vector y = y0;
    for (int n = 0; n < periods; ++n) advance(y, static_cast<std::size_t>((n / 12) % 3));
    for (int path = 0; path < 20; ++path) {
      y = y0;
      int n = 0;
      while (n < periods) {
        const auto k = static_cast<std::size_t>(pick(rng));
        for (int h = hold(rng); h > 0 && n < periods; --h, ++n) advance(y, k);
      }
    }
  }
  return env;
}

StateGrid build_axes(const mdp::MdpModel& model, const AxisCounts& counts, const Envelope& envelope, double pad) {
  const mdp::ConstraintParams& cons = model.cons;
  const int ell = model.ges.sys.ell;
  if (static_cast<int>(counts.y.size()) != ell) {
    throw DimensionError("build_axes: need one y count per reduced coordinate");
  }
  if (counts.r < 0 || counts.p < 0) throw DomainError("build_axes: negative axis count");
  AxisGrid r = AxisGrid::uniform("r", cons.r_lo, cons.r_hi, counts.r);
  AxisGrid p = AxisGrid::uniform("p", cons.p_lo, cons.p_hi, counts.p);

  const RowVector cm = model.ges.sys.c_m();
  for (int k = 0; k + 1 < ell; ++k) {
    if (cm(k) != 0.0) throw DomainError("build_axes: reduced system is not aligned on its last coordinate");
  }
  const double c = cm(ell - 1);
  std::vector<AxisGrid> y;
  for (int k = 0; k < ell; ++k) {
    const std::string name = "y" + std::to_string(k + 1);
    if (k == ell - 1) {
      y.push_back(AxisGrid::uniform(name, cons.q_lo / c, cons.q_hi / c, counts.y[static_cast<std::size_t>(k)]));
      continue;
    }
    const double lo = envelope.lo(k), hi = envelope.hi(k);
    if (!(hi > lo)) throw DomainError("build_axes: empty simulated range for " + name);
    const double w = hi - lo;
    y.push_back(AxisGrid::uniform(name, lo - pad * w, hi + pad * w, counts.y[static_cast<std::size_t>(k)]));
  }
  return StateGrid(std::move(r), std::move(p), std::move(y));
}

}  // namespace geostore::grid
