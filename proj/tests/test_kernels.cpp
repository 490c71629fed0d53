#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "hycot/kernels.hpp"
#include "hycot/model.hpp"
#include "hycot/rng.hpp"

using namespace hycot;
namespace k = hycot::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

const k::KernelTable* vector_table() { return k::avx2_kernels(); }

// Sizes around the 4x8 register tile and its tails.
const std::vector<std::size_t> kSizes = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 33};

class RestoreSelection : public ::testing::Test {
 protected:
  void TearDown() override { k::select("auto"); }
};

}  // namespace

TEST(ScalarKernels, GemmAgainstExtendedPrecisionOracle) {
  Rng rng(1);
  for (std::size_t m : {1, 3, 6})
    for (std::size_t n : {1, 5, 9})
      for (std::size_t kk : {1, 4, 13}) {
        const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng), c0 = random_vec(m * n, rng);
        auto c = c0;
        k::scalar_kernels().gemm_nn(m, n, kk, a.data(), b.data(), c.data());
        auto ct = c0;
        // Same product with A stored transposed.
        std::vector<double> at(kk * m);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < kk; ++p) at[p * m + i] = a[i * kk + p];
        k::scalar_kernels().gemm_tn(m, n, kk, at.data(), b.data(), ct.data());
        auto cn = c0;
        std::vector<double> bt(n * kk);
        for (std::size_t p = 0; p < kk; ++p)
          for (std::size_t j = 0; j < n; ++j) bt[j * kk + p] = b[p * n + j];
        k::gemm_nt(m, n, kk, a.data(), bt.data(), cn.data());
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            long double ref = c0[i * n + j];
            for (std::size_t p = 0; p < kk; ++p) ref += static_cast<long double>(a[i * kk + p]) * b[p * n + j];
            EXPECT_NEAR(c[i * n + j], static_cast<double>(ref), 1e-13);
            EXPECT_NEAR(ct[i * n + j], static_cast<double>(ref), 1e-13);
            EXPECT_NEAR(cn[i * n + j], static_cast<double>(ref), 1e-13);
          }
      }
}

TEST(ScalarKernels, ElementwiseKernels) {
  const std::vector<double> x = {-2, -0.5, 0, 0.5, 3};
  std::vector<double> y(x.size());
  k::scalar_kernels().leaky_relu(x.size(), 0.1, x.data(), y.data());
  EXPECT_EQ(y, (std::vector<double>{-2 * 0.1, -0.5 * 0.1, 0, 0.5, 3}));
  std::vector<double> acc = {1, 1, 1, 1, 1};
  k::scalar_kernels().axpy(x.size(), 2.0, x.data(), acc.data());
  EXPECT_EQ(acc, (std::vector<double>{-3, 0, 1, 2, 7}));
}

TEST(ScalarKernels, AdamFirstStepIsSignTimesLr) {
  const std::vector<double> g = {0.3, -2.0, 1e-3};
  std::vector<double> w = {1, 1, 1}, m(3, 0), v(3, 0);
  const k::AdamParams p{0.01, 0.9, 0.999, 1e-8, 1 - 0.9, 1 - 0.999};
  k::scalar_kernels().adam_update(3, p, g.data(), w.data(), m.data(), v.data());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(w[i], 1 - 0.01 * (g[i] > 0 ? 1 : -1), 1e-7);
}

TEST(Avx2Kernels, GemmBitIdenticalToScalar) {
  const auto* vt = vector_table();
  if (!vt) GTEST_SKIP() << "AVX2/FMA not available";
  Rng rng(2);
  for (std::size_t m : kSizes)
    for (std::size_t n : kSizes)
      for (std::size_t kk : {1, 2, 7, 16, 31}) {
        const auto a = random_vec(m * kk, rng), b = random_vec(kk * n, rng), c0 = random_vec(m * n, rng);
        auto cs = c0, cv = c0;
        k::scalar_kernels().gemm_nn(m, n, kk, a.data(), b.data(), cs.data());
        vt->gemm_nn(m, n, kk, a.data(), b.data(), cv.data());
        ASSERT_TRUE(bit_equal(cs, cv)) << "gemm_nn m=" << m << " n=" << n << " k=" << kk;
        const auto at = random_vec(kk * m, rng);
        cs = c0;
        cv = c0;
        k::scalar_kernels().gemm_tn(m, n, kk, at.data(), b.data(), cs.data());
        vt->gemm_tn(m, n, kk, at.data(), b.data(), cv.data());
        ASSERT_TRUE(bit_equal(cs, cv)) << "gemm_tn m=" << m << " n=" << n << " k=" << kk;
      }
}

TEST(Avx2Kernels, ElementwiseBitIdenticalToScalar) {
  const auto* vt = vector_table();
  if (!vt) GTEST_SKIP() << "AVX2/FMA not available";
  Rng rng(3);
  for (std::size_t n : kSizes) {
    const auto x = random_vec(n, rng, -5, 5);
    std::vector<double> ys(n), yv(n);
    k::scalar_kernels().leaky_relu(n, 0.01, x.data(), ys.data());
    vt->leaky_relu(n, 0.01, x.data(), yv.data());
    EXPECT_TRUE(bit_equal(ys, yv)) << "leaky_relu n=" << n;

    auto as = random_vec(n, rng), av = as;
    k::scalar_kernels().axpy(n, 0.37, x.data(), as.data());
    vt->axpy(n, 0.37, x.data(), av.data());
    EXPECT_TRUE(bit_equal(as, av)) << "axpy n=" << n;

    const auto g = random_vec(n, rng);
    auto ws = random_vec(n, rng), ms = random_vec(n, rng, -0.1, 0.1), vs = random_vec(n, rng, 0, 0.1);
    auto wv = ws, mv = ms, vv = vs;
    const k::AdamParams p{1e-3, 0.9, 0.999, 1e-8, 1 - std::pow(0.9, 7), 1 - std::pow(0.999, 7)};
    k::scalar_kernels().adam_update(n, p, g.data(), ws.data(), ms.data(), vs.data());
    vt->adam_update(n, p, g.data(), wv.data(), mv.data(), vv.data());
    EXPECT_TRUE(bit_equal(ws, wv) && bit_equal(ms, mv) && bit_equal(vs, vv)) << "adam n=" << n;
  }
}

TEST(Avx2Kernels, NegativeZeroAndSpecialValuesInLeakyRelu) {
  const auto* vt = vector_table();
  if (!vt) GTEST_SKIP() << "AVX2/FMA not available";
  const std::vector<double> x = {-0.0, 0.0, 1e-310, -1e-310, 1e300, -1e300, 2, -2};
  std::vector<double> ys(x.size()), yv(x.size());
  k::scalar_kernels().leaky_relu(x.size(), 0.01, x.data(), ys.data());
  vt->leaky_relu(x.size(), 0.01, x.data(), yv.data());
  EXPECT_TRUE(bit_equal(ys, yv));
}

TEST_F(RestoreSelection, SelectionSwitchesTables) {
  EXPECT_TRUE(k::select("scalar"));
  EXPECT_STREQ(k::active().name, "scalar");
  if (vector_table()) {
    EXPECT_TRUE(k::select("avx2"));
    EXPECT_STREQ(k::active().name, "avx2");
  } else {
    EXPECT_FALSE(k::select("avx2"));
    EXPECT_STREQ(k::active().name, "scalar");
  }
  EXPECT_FALSE(k::select("neon-or-whatever"));
  EXPECT_TRUE(k::select("auto"));
}

TEST_F(RestoreSelection, ModelOutputIdenticalUnderEitherTable) {
  if (!vector_table()) GTEST_SKIP() << "AVX2/FMA not available";
  ModelConfig c;
  c.bands = 21;
  c.group_depth = 4;
  c.embed_dim = 12;
  c.blocks = 2;
  c.heads = 3;
  c.hidden_dim = 40;
  c.latent_channels = 5;
  c.block_mlp_dim = 10;
  c.seed = 4;
  const ModelWeights w = ModelWeights::initialize(c);
  HsiCube cube(9, 7, c.bands);
  Rng rng(5);
  for (double& v : cube.data) v = rng.uniform();
  k::select("scalar");
  const ImageForward s = forward_image(cube, w);
  k::select("avx2");
  const ImageForward v = forward_image(cube, w);
  EXPECT_TRUE(bit_equal(s.latents.data, v.latents.data));
  EXPECT_TRUE(bit_equal(s.reconstruction.data, v.reconstruction.data));
}
