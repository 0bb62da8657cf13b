#ifndef FCG_DUAL_HPP
#define FCG_DUAL_HPP

#include <cmath>
#include <type_traits>

namespace fcg {

// Forward-mode scalar with a single derivative slot.  Nesting the type
// (Dual<Dual<double>>, ...) yields exact mixed second and third partials,
// which is all the spray and the second variation need.
template <class T>
struct Dual {
  T a{};  // value
  T b{};  // derivative

  Dual() = default;
  Dual(T value) : a(value), b(T(0)) {}             // NOLINT implicit from value
  Dual(double value) requires(!std::is_same_v<T, double>) : a(T(value)), b(T(0)) {}
  Dual(T value, T deriv) : a(value), b(deriv) {}

  Dual& operator+=(const Dual& o) { a += o.a; b += o.b; return *this; }
  Dual& operator-=(const Dual& o) { a -= o.a; b -= o.b; return *this; }
  Dual& operator*=(const Dual& o) { b = b * o.a + a * o.b; a *= o.a; return *this; }
};

template <class T> Dual<T> operator+(Dual<T> x, const Dual<T>& y) { return x += y; }
template <class T> Dual<T> operator-(Dual<T> x, const Dual<T>& y) { return x -= y; }
template <class T> Dual<T> operator-(const Dual<T>& x) { return {-x.a, -x.b}; }
template <class T> Dual<T> operator*(const Dual<T>& x, const Dual<T>& y) {
  return {x.a * y.a, x.b * y.a + x.a * y.b};
}
template <class T> Dual<T> operator/(const Dual<T>& x, const Dual<T>& y) {
  T inv = T(1) / y.a;
  T q = x.a * inv;
  return {q, (x.b - q * y.b) * inv};
}

template <class T> Dual<T> operator+(const Dual<T>& x, double s) { return {x.a + T(s), x.b}; }
template <class T> Dual<T> operator+(double s, const Dual<T>& x) { return x + s; }
template <class T> Dual<T> operator-(const Dual<T>& x, double s) { return {x.a - T(s), x.b}; }
template <class T> Dual<T> operator-(double s, const Dual<T>& x) { return {T(s) - x.a, -x.b}; }
template <class T> Dual<T> operator*(const Dual<T>& x, double s) { return {x.a * T(s), x.b * T(s)}; }
template <class T> Dual<T> operator*(double s, const Dual<T>& x) { return x * s; }
template <class T> Dual<T> operator/(const Dual<T>& x, double s) { return x * (1.0 / s); }
template <class T> Dual<T> operator/(double s, const Dual<T>& x) { return Dual<T>(T(s)) / x; }

using std::sqrt;
template <class T> Dual<T> sqrt(const Dual<T>& x) {
  T r = sqrt(x.a);
  return {r, x.b / (2.0 * r)};
}
using std::abs;
template <class T> Dual<T> abs(const Dual<T>& x) { return x.a < T(0) ? -x : x; }

template <class T> bool operator<(const Dual<T>& x, const Dual<T>& y) { return x.a < y.a; }
template <class T> bool operator>(const Dual<T>& x, const Dual<T>& y) { return x.a > y.a; }
template <class T> bool operator<(const Dual<T>& x, double s) { return x.a < T(s); }
template <class T> bool operator>(const Dual<T>& x, double s) { return x.a > T(s); }

inline double value_of(double x) { return x; }
template <class T> double value_of(const Dual<T>& x) { return value_of(x.a); }

using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

// Seeds the outermost derivative slot of a (possibly nested) dual.
template <class S> void seed(S& x, double dir) { x.b = dir; }
inline void seed(double&, double) {}

}  // namespace fcg

#endif
