#pragma once

#include <Eigen/Dense>

#include <vector>

#include "json.hpp"
#include "qgprobe/estimation/ringdown.hpp"

namespace qgprobe::estimation {

enum class Quadrature { X, Y };

/// Early-time frequency shift: the residual after subtracting the base ring-down
/// model is fitted to dQ/d(f_m t) * (delta_fm0 t + c).
struct ShiftFit {
  double delta_fm0 = 0.0;  // Hz
  double c = 0.0;          // cycles; absorbs minus the integrated shift
  double delta_fm0_err = 0.0;
  double c_err = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  FitWindow window;
  Quadrature quadrature = Quadrature::X;
  double cost = 0.0;
  std::size_t n_samples = 0;
};

struct ShiftPair {
  ShiftFit x;
  ShiftFit y;
  const ShiftFit& get(Quadrature q) const { return q == Quadrature::X ? x : y; }
};

struct ShiftOptions {
  FitWindow early{0.0, 50e-6};
  LineFrequencies lines;
};

/// Throws BaseFitInvalid for a non-finite or zero-amplitude base, WindowOverlap when
/// the early window reaches into the base window, WindowOutOfRange when it leaves
/// the record or holds fewer than 3 samples.
ShiftPair fit_transient_shift(const QuadratureRecord& rec, const RingdownFit& base, const ShiftOptions& opt = {});

nlohmann::json to_json(const ShiftFit& fit);

}  // namespace qgprobe::estimation
