#pragma once

#include "geostore/mdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace geostore::grid {

/// Points of one state coordinate. Cell i is (mid(i-1, i), mid(i, i+1)]
/// with unbounded first and last cells.
class AxisGrid {
 public:
  AxisGrid() = default;
  AxisGrid(std::string name, std::vector<double> points);

  /// Uniform axis with `intervals` intervals on [lo, hi]; zero intervals
  /// gives the single point (lo + hi) / 2.
  static AxisGrid uniform(std::string name, double lo, double hi, int intervals);

  const std::string& name() const { return name_; }
  const std::vector<double>& points() const { return points_; }
  int size() const { return static_cast<int>(points_.size()); }
  double point(int i) const { return points_[static_cast<std::size_t>(i)]; }

  /// Index of the cell containing x.
  int cell_of(double x) const;

  /// Cell boundaries including the infinite ends (size() + 1 entries).
  std::vector<double> edges() const;

 private:
  std::string name_;
  std::vector<double> points_;
  std::vector<double> mids_;
};

/// Tensor grid over (r, p, y1..y_ell). Flat index: p fastest, then r, then
/// y1..y_ell with y1 fastest, so one (r, p) block is contiguous.
class StateGrid {
 public:
  StateGrid() = default;
  StateGrid(AxisGrid r, AxisGrid p, std::vector<AxisGrid> y);

  const AxisGrid& r() const { return r_; }
  const AxisGrid& p() const { return p_; }
  const std::vector<AxisGrid>& y() const { return y_; }
  int ell() const { return static_cast<int>(y_.size()); }

  std::int64_t size() const { return block_size() * y_size_; }
  std::int64_t block_size() const { return static_cast<std::int64_t>(r_.size()) * p_.size(); }
  std::int64_t y_size() const { return y_size_; }

  std::int64_t flat(int ir, int ip, std::int64_t iy) const { return iy * block_size() + ir * p_.size() + ip; }
  void split(std::int64_t m, int& ir, int& ip, std::int64_t& iy) const;

  std::int64_t y_flat(const std::vector<int>& idx) const;
  std::vector<int> y_multi(std::int64_t iy) const;
  Vector y_point(std::int64_t iy) const;
  std::int64_t y_project(const Vector& y) const;

  /// Grid state of flat index m (f = 0).
  mdp::State state(std::int64_t m) const;

  struct Projection {
    mdp::State point;
    std::int64_t index = 0;
  };
  Projection project(const mdp::State& x) const;

  /// FNV-1a over axis names and point bit patterns.
  std::uint64_t hash() const;

 private:
  AxisGrid r_, p_;
  std::vector<AxisGrid> y_;
  std::vector<std::int64_t> y_strides_;
  std::int64_t y_size_ = 1;
};

/// Per-coordinate range of the reduced state over simulated operation.
struct Envelope {
  Vector lo;
  Vector hi;
};

/// Simulates the reduced system from empty, ground-temperature and full
/// storages under held, cyclic and seeded random action sequences (with
/// the GES band respected) and returns the coordinate-wise range.
Envelope simulate_envelope(const mdp::MdpModel& model, int periods, std::uint64_t seed);

struct AxisCounts {
  int r = 8;
  int p = 11;
  std::vector<int> y{4, 4, 4, 8};  // intervals per axis; the last is the aligned one
};

/// r and p uniform on their bands; the last y axis uniform with c y in
/// [q_lo, q_hi]; the others uniform on the envelope padded by `pad`
/// of its width on each side.
StateGrid build_axes(const mdp::MdpModel& model, const AxisCounts& counts, const Envelope& envelope,
                     double pad = 0.1);

}  // namespace geostore::grid
