#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "bsc/kernels.hpp"
#include "support.hpp"

using namespace bsc;
using namespace bsc::test;
namespace k = bsc::kernels;

namespace {

struct Case {
  MatrixXd p, a, pts;
  VectorXd c, b;
};

Case random_case(std::mt19937_64& rng, int dim, int count, int facets) {
  std::normal_distribution<double> g(0.0, 1.0);
  Case out;
  out.p = random_spd(rng, dim);
  out.c = VectorXd::NullaryExpr(dim, [&] { return g(rng); });
  out.a = MatrixXd::NullaryExpr(facets, dim, [&] { return g(rng); });
  out.b = VectorXd::NullaryExpr(facets, [&] { return 2.0 + g(rng); });
  out.pts = MatrixXd::NullaryExpr(count, dim, [&] { return g(rng); });
  return out;
}

k::PointsView points(const MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.rows()), static_cast<int>(m.cols())}; }
k::MatrixView view(const MatrixXd& m) { return {m.data(), static_cast<int>(m.rows()), static_cast<int>(m.cols())}; }

}  // namespace

TEST_CASE("scalar kernels agree with Eigen expressions") {
  std::mt19937_64 rng(1);
  const auto c = random_case(rng, 4, 37, 9);
  std::vector<double> q(37), s(37);
  k::scalar::quad_forms(view(c.p), c.c.data(), points(c.pts), q.data());
  k::scalar::min_facet_slack(view(c.a), c.b.data(), points(c.pts), s.data());
  for (int i = 0; i < 37; ++i) {
    const VectorXd x = c.pts.row(i).transpose();
    const VectorXd d = x - c.c;
    CHECK(q[i] == doctest::Approx(d.dot(c.p * d)).epsilon(1e-13));
    CHECK(s[i] == doctest::Approx((c.b - c.a * x).minCoeff()).epsilon(1e-13));
  }
}

TEST_CASE("AVX2 kernels match the scalar reference") {
  if (!k::isa_available(k::Isa::avx2)) {
    CHECK_THROWS_AS(k::set_isa(k::Isa::avx2), std::invalid_argument);
    return;
  }
  std::mt19937_64 rng(2);
  for (int dim = 1; dim <= 6; ++dim) {
    for (int count : {1, 3, 4, 5, 17, 1000, 1003}) {
      const auto c = random_case(rng, dim, count, 2 * dim + 1);
      std::vector<double> qs(count), qa(count), ss(count), sa(count);
      k::scalar::quad_forms(view(c.p), c.c.data(), points(c.pts), qs.data());
      k::avx2::quad_forms(view(c.p), c.c.data(), points(c.pts), qa.data());
      k::scalar::min_facet_slack(view(c.a), c.b.data(), points(c.pts), ss.data());
      k::avx2::min_facet_slack(view(c.a), c.b.data(), points(c.pts), sa.data());
      for (int i = 0; i < count; ++i) {
        CHECK(std::abs(qs[i] - qa[i]) <= 1e-12 * (1.0 + std::abs(qs[i])));
        CHECK(std::abs(ss[i] - sa[i]) <= 1e-12 * (1.0 + std::abs(ss[i])));
      }
    }
  }
}

TEST_CASE("dispatch follows the selected ISA and checks shapes") {
  std::mt19937_64 rng(3);
  const auto c = random_case(rng, 3, 50, 6);
  std::vector<double> a(50), b(50);
  const auto before = k::active_isa();
  k::set_isa(k::Isa::scalar);
  CHECK(k::active_isa() == k::Isa::scalar);
  k::quad_forms(c.p, c.c, c.pts, a);
  if (k::isa_available(k::Isa::avx2)) {
    k::set_isa(k::Isa::avx2);
    k::quad_forms(c.p, c.c, c.pts, b);
    for (int i = 0; i < 50; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * (1.0 + std::abs(a[i])));
  }
  k::set_isa(before);
  std::vector<double> short_out(10);
  CHECK_THROWS(k::quad_forms(c.p, c.c, c.pts, short_out));
  CHECK_THROWS(k::min_facet_slack(c.a, VectorXd::Zero(2), c.pts, a));
  CHECK(std::string(k::isa_name(k::Isa::scalar)) == "scalar");
}
