#ifndef VRLAB_VEC_HPP
#define VRLAB_VEC_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "vrlab/errors.hpp"

namespace vrlab {

// Flat parameter vector; the optimization variable.
using ParamVector = std::vector<double>;

inline void check_same_length(const ParamVector& a, const ParamVector& b,
                              const char* what) {
  if (a.size() != b.size())
    throw InvalidArgument(std::string(what) + ": length mismatch");
}

inline bool all_finite(const ParamVector& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline double dot(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const ParamVector& v) { return dot(v, v); }

inline double norm(const ParamVector& v) { return std::sqrt(squared_norm(v)); }

// y += alpha * x
inline void axpy(double alpha, const ParamVector& x, ParamVector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline ParamVector subtract(const ParamVector& a, const ParamVector& b) {
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline double distance(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace vrlab

#endif  // VRLAB_VEC_HPP
