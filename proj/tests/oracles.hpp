#pragma once

// Independent reference computations for the tests. Plain arrays and scalar
// arithmetic only; nothing here calls into the library.

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using M4 = std::array<std::array<double, 4>, 4>;

inline M4 homogeneous_rz(double a, double tx, double ty, double tz) {
  const double c = std::cos(a);
  const double s = std::sin(a);
  return {{{c, -s, 0, tx}, {s, c, 0, ty}, {0, 0, 1, tz}, {0, 0, 0, 1}}};
}

inline M4 mul(const M4& a, const M4& b) {
  M4 out{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

struct Pixel {
  double u;
  double v;
};

inline Pixel pinhole(double fx, double fy, double cx, double cy, double x, double y, double z) {
  return {fx * x / z + cx, fy * y / z + cy};
}

// Frozen values from an independent calculator (Python math module).
inline constexpr double kSideslipHalfRad = 0.2666466269379763;      // atan(tan(0.5)/2)
inline constexpr double kTurningRadius03 = 0.8374186623774389;      // l = 0.256
inline constexpr double kYawRate1_03 = 1.1941458256506863;          // v = 1, delta = 0.3
inline constexpr double kYawRate2_05 = 4.117157182394577;           // v = 2, delta = 0.5
inline constexpr double kSteer02 = 0.10137004188852573;             // alpha 0.2, Ld 1, l 0.256
inline constexpr double kAlphaExample = 0.6353981633974483;         // atan2(1,1) - 0.15
inline constexpr double kDistanceStartToWp1 = 1.2206555615733703;   // (2,-1) to (1.3,0)
inline constexpr double kE2Yaw10 = 0.2635303069971304;              // 10 deg yaw, default marker

/// Algebraic (Kasa) circle fit; returns {cx, cy, r}.
inline std::array<double, 3> fit_circle(const std::vector<std::array<double, 2>>& pts) {
  // Minimise sum (x^2 + y^2 + D x + E y + F)^2 via 3x3 normal equations.
  double a[3][4] = {};
  for (const auto& p : pts) {
    const double row[3] = {p[0], p[1], 1.0};
    const double rhs = -(p[0] * p[0] + p[1] * p[1]);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a[i][j] += row[i] * row[j];
      a[i][3] += row[i] * rhs;
    }
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    for (int k = 0; k < 4; ++k) std::swap(a[c][k], a[piv][k]);
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 4; ++k) a[r][k] -= f * a[c][k];
    }
  }
  const double d = a[0][3] / a[0][0];
  const double e = a[1][3] / a[1][1];
  const double f = a[2][3] / a[2][2];
  const double cx = -d / 2.0;
  const double cy = -e / 2.0;
  return {cx, cy, std::sqrt(cx * cx + cy * cy - f)};
}

/// Central finite difference of a vector function of 6 parameters.
inline std::vector<std::array<double, 6>> central_difference(
    const std::function<std::vector<double>(const std::array<double, 6>&)>& f, double h) {
  const std::array<double, 6> zero{};
  const std::size_t m = f(zero).size();
  std::vector<std::array<double, 6>> jac(m);
  for (int k = 0; k < 6; ++k) {
    std::array<double, 6> p = zero;
    std::array<double, 6> q = zero;
    p[k] = h;
    q[k] = -h;
    const auto fp = f(p);
    const auto fq = f(q);
    for (std::size_t i = 0; i < m; ++i) jac[i][k] = (fp[i] - fq[i]) / (2.0 * h);
  }
  return jac;
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.stddev += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(m.stddev / static_cast<double>(xs.size() - 1));
  return m;
}

}  // namespace oracle
