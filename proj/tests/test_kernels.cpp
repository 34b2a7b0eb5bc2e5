#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "svae/kernels.hpp"
#include "svae/rng.hpp"

using namespace svae;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("scalar kernels basic identities") {
  const auto& k = kernels::scalar_ops();
  std::vector<double> a{1.0, 2.0, 3.0};
  std::vector<double> b{4.0, -1.0, 0.5};
  CHECK(k.dot(a.data(), b.data(), 3) == doctest::Approx(3.5));
  CHECK(k.sum(a.data(), 3) == doctest::Approx(6.0));

  std::vector<double> y{1.0, 1.0, 1.0};
  k.axpy(2.0, a.data(), y.data(), 3);
  CHECK(y[0] == doctest::Approx(3.0));
  CHECK(y[2] == doctest::Approx(7.0));

  std::vector<double> out(3);
  k.mul(a.data(), b.data(), out.data(), 3);
  CHECK(out[1] == doctest::Approx(-2.0));

  CHECK(k.ratio_sum(a.data(), b.data(), 3) ==
        doctest::Approx(1.0 / 4.0 - 2.0 + 6.0));

  std::vector<std::complex<double>> c{{3.0, 4.0}, {0.0, 0.0}, {-1.0, 1.0}};
  std::vector<double> p(3);
  k.complex_power(c.data(), p.data(), 3);
  CHECK(p[0] == doctest::Approx(25.0));
  CHECK(p[1] == doctest::Approx(0.0));
  CHECK(p[2] == doctest::Approx(2.0));
}

TEST_CASE("avx2 kernels match scalar reference") {
  const kernels::Ops* simd = kernels::avx2_ops();
  if (!simd) return;  // CPU without AVX2
  const auto& ref = kernels::scalar_ops();
  Rng rng(42);

  for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 64u, 513u}) {
    const auto a = random_vec(n, rng);
    const auto b = random_vec(n, rng);

    CHECK(simd->dot(a.data(), b.data(), n) ==
          doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));
    CHECK(simd->sum(a.data(), n) ==
          doctest::Approx(ref.sum(a.data(), n)).epsilon(1e-12));

    auto y1 = random_vec(n, rng);
    auto y2 = y1;
    simd->axpy(0.7, a.data(), y1.data(), n);
    ref.axpy(0.7, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-13));

    std::vector<double> o1(n), o2(n);
    simd->mul(a.data(), b.data(), o1.data(), n);
    ref.mul(a.data(), b.data(), o2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);

    std::vector<double> den(n);
    for (auto& d : den) d = rng.uniform(0.5, 3.0);
    CHECK(simd->ratio_sum(a.data(), den.data(), n) ==
          doctest::Approx(ref.ratio_sum(a.data(), den.data(), n))
              .epsilon(1e-12));

    std::vector<std::complex<double>> c(n);
    for (auto& z : c) z = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    std::vector<double> p1(n), p2(n);
    simd->complex_power(c.data(), p1.data(), n);
    ref.complex_power(c.data(), p2.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-14));
  }
}

TEST_CASE("active dispatch picks a valid table") {
  const auto& k = kernels::active();
  std::vector<double> a{1.0, 2.0};
  CHECK(k.dot(a.data(), a.data(), 2) == doctest::Approx(5.0));
}
