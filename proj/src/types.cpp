#include "deqmri/types.hpp"

#include <cmath>

namespace deqmri {

auto norm(ComplexImage const &x) -> double
{
  double acc = 0.0;
  for (auto const &v : x.data) {
    acc += std::norm(v);
  }
  return std::sqrt(acc);
}

auto inner(ComplexImage const &a, ComplexImage const &b) -> Cx
{
  require_same_shape(a, b, "inner");
  Cx acc{};
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    acc += std::conj(a.data[i]) * b.data[i];
  }
  return acc;
}

auto is_finite(ComplexImage const &x) -> bool
{
  for (auto const &v : x.data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) { return false; }
  }
  return true;
}

auto operator+(ComplexImage a, ComplexImage const &b) -> ComplexImage
{
  require_same_shape(a, b, "operator+");
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] += b.data[i];
  }
  return a;
}

auto operator-(ComplexImage a, ComplexImage const &b) -> ComplexImage
{
  require_same_shape(a, b, "operator-");
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] -= b.data[i];
  }
  return a;
}

auto operator*(double s, ComplexImage a) -> ComplexImage
{
  for (auto &v : a.data) {
    v *= s;
  }
  return a;
}

auto magnitude(ComplexImage const &x) -> std::vector<double>
{
  std::vector<double> out(x.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(x.data[i]);
  }
  return out;
}

} // namespace deqmri
