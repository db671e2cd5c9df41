#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace deqmri {

using Cx = std::complex<double>;

struct DimensionError : std::invalid_argument
{
  using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument
{
  using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error
{
  DivergenceError(std::string const &what, long iteration)
    : std::runtime_error(what)
    , iteration{iteration}
  {
  }
  long iteration;
};

// Raised when a self-supervised code path reads groundtruth.
struct AccessError : std::logic_error
{
  using std::logic_error::logic_error;
};

// Row-major (h, w) complex image. Column index is the k_y / line direction.
struct ComplexImage
{
  long h = 0;
  long w = 0;
  std::vector<Cx> data;

  ComplexImage() = default;
  ComplexImage(long h_, long w_)
    : h{h_}
    , w{w_}
    , data(static_cast<std::size_t>(h_ * w_))
  {
  }

  auto size() const -> long { return h * w; }
  auto operator()(long r, long c) -> Cx & { return data[static_cast<std::size_t>(r * w + c)]; }
  auto operator()(long r, long c) const -> Cx const & { return data[static_cast<std::size_t>(r * w + c)]; }
  auto same_shape(ComplexImage const &o) const -> bool { return h == o.h && w == o.w; }
};

inline void require_same_shape(ComplexImage const &a, ComplexImage const &b, char const *where)
{
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(where) + ": image shape mismatch (" + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" + std::to_string(b.w) + ")");
  }
}

// Small vector helpers on complex images, used across modules.
auto norm(ComplexImage const &x) -> double;
auto inner(ComplexImage const &a, ComplexImage const &b) -> Cx; // sum conj(a) * b
auto is_finite(ComplexImage const &x) -> bool;
auto operator+(ComplexImage a, ComplexImage const &b) -> ComplexImage;
auto operator-(ComplexImage a, ComplexImage const &b) -> ComplexImage;
auto operator*(double s, ComplexImage a) -> ComplexImage;
auto magnitude(ComplexImage const &x) -> std::vector<double>;

} // namespace deqmri
