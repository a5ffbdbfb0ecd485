#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>

#include "microformal/errors.hpp"

namespace microformal {

// Exact rational scalar.
using Rat = boost::multiprecision::cpp_rational;

// Gaussian rational: exact field containing the imaginary unit. Used wherever
// hbar-phases demand i but the identities under test are exact.
struct CRat {
  Rat re{0};
  Rat im{0};

  CRat() = default;
  CRat(int v) : re(v) {}
  CRat(long long v) : re(v) {}
  CRat(Rat r) : re(std::move(r)) {}
  CRat(Rat r, Rat i) : re(std::move(r)), im(std::move(i)) {}

  friend CRat operator+(const CRat& a, const CRat& b) { return {a.re + b.re, a.im + b.im}; }
  friend CRat operator-(const CRat& a, const CRat& b) { return {a.re - b.re, a.im - b.im}; }
  friend CRat operator-(const CRat& a) { return {-a.re, -a.im}; }
  friend CRat operator*(const CRat& a, const CRat& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend CRat operator/(const CRat& a, const CRat& b) {
    Rat n = b.re * b.re + b.im * b.im;
    require(n != 0, ErrorKind::domain, "CRat: division by zero");
    return {(a.re * b.re + a.im * b.im) / n, (a.im * b.re - a.re * b.im) / n};
  }
  CRat& operator+=(const CRat& b) { re += b.re; im += b.im; return *this; }
  CRat& operator-=(const CRat& b) { re -= b.re; im -= b.im; return *this; }
  CRat& operator*=(const CRat& b) { *this = *this * b; return *this; }
  CRat& operator/=(const CRat& b) { *this = *this / b; return *this; }
  friend bool operator==(const CRat& a, const CRat& b) { return a.re == b.re && a.im == b.im; }
  friend bool operator!=(const CRat& a, const CRat& b) { return !(a == b); }
};

using CD = std::complex<double>;

template <class F>
struct FieldOps;

template <>
struct FieldOps<Rat> {
  static constexpr bool exact = true;
  static constexpr bool has_imag = false;
  static constexpr bool analytic = false;
  static Rat zero() { return Rat(0); }
  static Rat one() { return Rat(1); }
  static Rat from_int(long long v) { return Rat(v); }
  static Rat ratio(long long n, long long d) { return Rat(n) / Rat(d); }
  static bool is_zero(const Rat& a) { return a == 0; }
  static Rat imag_unit() { fail(ErrorKind::domain, "rational field has no imaginary unit"); }
  static Rat exp(const Rat&) { fail(ErrorKind::domain, "exp not available over exact rationals"); }
  static Rat log(const Rat&) { fail(ErrorKind::domain, "log not available over exact rationals"); }
  static double mag(const Rat& a) { return std::abs(static_cast<double>(a)); }
  static CD to_cd(const Rat& a) { return CD(static_cast<double>(a), 0.0); }
};

template <>
struct FieldOps<CRat> {
  static constexpr bool exact = true;
  static constexpr bool has_imag = true;
  static constexpr bool analytic = false;
  static CRat zero() { return CRat(); }
  static CRat one() { return CRat(1); }
  static CRat from_int(long long v) { return CRat(v); }
  static CRat ratio(long long n, long long d) { return CRat(Rat(n) / Rat(d)); }
  static bool is_zero(const CRat& a) { return a.re == 0 && a.im == 0; }
  static CRat imag_unit() { return CRat(Rat(0), Rat(1)); }
  static CRat exp(const CRat&) { fail(ErrorKind::domain, "exp not available over exact rationals"); }
  static CRat log(const CRat&) { fail(ErrorKind::domain, "log not available over exact rationals"); }
  static double mag(const CRat& a) {
    return std::hypot(static_cast<double>(a.re), static_cast<double>(a.im));
  }
  static CD to_cd(const CRat& a) {
    return CD(static_cast<double>(a.re), static_cast<double>(a.im));
  }
};

template <>
struct FieldOps<CD> {
  static constexpr bool exact = false;
  static constexpr bool has_imag = true;
  static constexpr bool analytic = true;
  static CD zero() { return CD(0.0, 0.0); }
  static CD one() { return CD(1.0, 0.0); }
  static CD from_int(long long v) { return CD(static_cast<double>(v), 0.0); }
  static CD ratio(long long n, long long d) {
    return CD(static_cast<double>(n) / static_cast<double>(d), 0.0);
  }
  static bool is_zero(const CD& a) { return a.real() == 0.0 && a.imag() == 0.0; }
  static CD imag_unit() { return CD(0.0, 1.0); }
  static CD exp(const CD& a) { return std::exp(a); }
  static CD log(const CD& a) {
    require(a != CD(0.0, 0.0), ErrorKind::domain, "log of zero");
    return std::log(a);
  }
  static double mag(const CD& a) { return std::abs(a); }
  static CD to_cd(const CD& a) { return a; }
};

}  // namespace microformal
