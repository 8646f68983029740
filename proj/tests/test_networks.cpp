#include <doctest.h>

#include <cmath>

#include "mid/finite_diff.hpp"
#include "mid/networks.hpp"
#include "mid/rng.hpp"

using namespace mid;

namespace {

ModelSpec small_image_spec() {
  ModelSpec m;
  m.kind = ModelKind::Image;
  m.mode = NoiseMode::Regression;
  m.image_h = 5;
  m.image_w = 4;
  m.psi_channels = 3;
  m.psi_hidden = 6;
  m.phi_channels = 4;
  return m;
}

ModelSpec small_points_spec() {
  ModelSpec m;
  m.kind = ModelKind::Points;
  m.mode = NoiseMode::Classification;
  m.point_hidden = 8;
  m.psi_hidden = 6;
  return m;
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.normal() * 0.5;
  return t;
}

}  // namespace

TEST_CASE("name round trips") {
  CHECK(model_kind_from_name(model_kind_name(ModelKind::Image)) == ModelKind::Image);
  CHECK(model_kind_from_name(model_kind_name(ModelKind::Points)) == ModelKind::Points);
  CHECK(noise_mode_from_name(noise_mode_name(NoiseMode::Regression)) ==
        NoiseMode::Regression);
  CHECK(noise_mode_from_name(noise_mode_name(NoiseMode::Classification)) ==
        NoiseMode::Classification);
  CHECK_THROWS_AS(model_kind_from_name("voxels"), ConfigError);
}

TEST_CASE("model spec validation ties kind to mode") {
  ModelSpec bad = small_image_spec();
  bad.mode = NoiseMode::Classification;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  ModelSpec bad2 = small_points_spec();
  bad2.mode = NoiseMode::Regression;
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("step losses match their definitions") {
  // Loss_t = (t/T - t_hat)^2
  CHECK(loss_step(3, 10, 0.3) == doctest::Approx(0.0));
  CHECK(loss_step(5, 10, 0.25) == doctest::Approx(0.0625));
  CHECK(loss_step_grad(5, 10, 0.25) == doctest::Approx(2.0 * (0.25 - 0.5)));
  CHECK(loss_total(0.25, 0.5) == doctest::Approx(0.75));  // unit weights
}

TEST_CASE("noise losses match their definitions") {
  Tensor eps({2}, {1.0, -1.0});
  Tensor hat({2}, {0.0, 0.0});
  CHECK(loss_noise_mse(eps, hat) == doctest::Approx(1.0));
  Tensor g = loss_noise_mse_grad(eps, hat);
  CHECK(g.data[0] == doctest::Approx(2.0 * (0.0 - 1.0) / 2.0));
  CHECK(g.data[1] == doctest::Approx(2.0 * (0.0 + 1.0) / 2.0));

  Tensor labels({2}, {1.0, 0.0});
  Tensor probs({2}, {0.5, 0.5});
  CHECK(loss_noise_bce(labels, probs) == doctest::Approx(std::log(2.0)));
  // perfect prediction gives ~0 even at the clamp
  Tensor exact({2}, {1.0, 0.0});
  CHECK(loss_noise_bce(labels, exact) < 1e-10);
  // clamp keeps the loss finite for confident mistakes
  Tensor wrong({2}, {0.0, 1.0});
  CHECK(std::isfinite(loss_noise_bce(labels, wrong)));
}

TEST_CASE("bce gradient matches finite differences") {
  Rng rng(21);
  Tensor labels({5}, {1, 0, 1, 1, 0});
  Tensor probs({5});
  for (double& v : probs.data) v = rng.uniform(0.05, 0.95);
  Tensor g = loss_noise_bce_grad(labels, probs);
  auto f = [&](const Tensor& p) { return loss_noise_bce(labels, p); };
  Tensor fd = finite_diff_grad(f, probs, 1e-6);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(g.data[i] == doctest::Approx(fd.data[i]).epsilon(1e-4));
}

TEST_CASE("step predictor outputs lie in (0,1) for both model kinds") {
  Rng rng(22);
  StepPredictor psi_img(small_image_spec(), rng);
  for (int i = 0; i < 10; ++i) {
    const double y = psi_img.predict(random_tensor({1, 5, 4}, rng));
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
  StepPredictor psi_pts(small_points_spec(), rng);
  for (int i = 0; i < 10; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 30));
    const double y = psi_pts.predict(random_tensor({n, 2}, rng));
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }
}

TEST_CASE("point networks are permutation invariant / equivariant") {
  Rng rng(23);
  StepPredictor psi(small_points_spec(), rng);
  NoisePredictor phi(small_points_spec(), rng);

  const std::size_t n = 9;
  Tensor x = random_tensor({n, 2}, rng);
  // a fixed permutation: rotate rows by 4
  Tensor xp({n, 2});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < 2; ++c) xp.at2(r, c) = x.at2((r + 4) % n, c);

  CHECK(psi.predict(x) == doctest::Approx(psi.predict(xp)).epsilon(1e-10));

  Tensor p = phi.predict(x, 3, 10);
  Tensor pp = phi.predict(xp, 3, 10);
  CHECK(p.shape == std::vector<std::size_t>{n});
  for (std::size_t r = 0; r < n; ++r) {
    CHECK(p.data[(r + 4) % n] == doctest::Approx(pp.data[r]).epsilon(1e-10));
    CHECK(pp.data[r] > 0.0);
    CHECK(pp.data[r] < 1.0);
  }
}

TEST_CASE("image noise predictor output has the input shape and depends on t") {
  Rng rng(24);
  NoisePredictor phi(small_image_spec(), rng);
  Tensor x = random_tensor({1, 5, 4}, rng);
  Tensor e1 = phi.predict(x, 1, 10);
  Tensor e9 = phi.predict(x, 9, 10);
  CHECK(e1.shape == x.shape);
  CHECK(e1.data != e9.data);  // step conditioning reaches the output
}

TEST_CASE("whole-network gradients match finite differences") {
  const double tol = 1e-3;
  Rng rng(25);

  auto check_params = [&](std::vector<Param*> params, auto&& loss_fn) {
    for (Param* prm : params) {
      const Tensor analytic = prm->grad;
      auto f = [&](const Tensor& w) {
        const Tensor saved = prm->value;
        prm->value = w;
        const double l = loss_fn();
        prm->value = saved;
        return l;
      };
      Tensor fd = finite_diff_grad(f, prm->value, 1e-5);
      for (std::size_t i = 0; i < fd.numel(); ++i) {
        const double denom =
            std::max({std::abs(fd.data[i]), std::abs(analytic.data[i]), 1e-5});
        CHECK(std::abs(fd.data[i] - analytic.data[i]) / denom < tol);
      }
      prm->zero_grad();
    }
  };

  SUBCASE("image step predictor") {
    StepPredictor psi(small_image_spec(), rng);
    Tensor x = random_tensor({1, 5, 4}, rng);
    const std::size_t t = 4, T = 10;
    const double t_hat = psi.forward(x);
    psi.backward(loss_step_grad(t, T, t_hat));
    check_params(psi.params(), [&] { return loss_step(t, T, psi.predict(x)); });
  }

  SUBCASE("image noise predictor") {
    NoisePredictor phi(small_image_spec(), rng);
    Tensor x = random_tensor({1, 5, 4}, rng);
    Tensor eps = random_tensor({1, 5, 4}, rng);
    Tensor out = phi.forward(x, 3, 10);
    phi.backward(loss_noise_mse_grad(eps, out));
    check_params(phi.params(),
                 [&] { return loss_noise_mse(eps, phi.predict(x, 3, 10)); });
  }

  SUBCASE("points step predictor") {
    StepPredictor psi(small_points_spec(), rng);
    Tensor x = random_tensor({6, 2}, rng);
    const std::size_t t = 2, T = 5;
    const double t_hat = psi.forward(x);
    psi.backward(loss_step_grad(t, T, t_hat));
    check_params(psi.params(), [&] { return loss_step(t, T, psi.predict(x)); });
  }

  SUBCASE("points noise predictor (classification)") {
    NoisePredictor phi(small_points_spec(), rng);
    Tensor x = random_tensor({6, 2}, rng);
    Tensor labels({6}, {0, 1, 0, 0, 1, 1});
    Tensor probs = phi.forward(x, 2, 5);
    phi.backward(loss_noise_bce_grad(labels, probs));
    check_params(phi.params(),
                 [&] { return loss_noise_bce(labels, phi.predict(x, 2, 5)); });
  }
}

TEST_CASE("same seed builds identical networks") {
  ModelSpec spec = small_image_spec();
  Rng a(77), b(77);
  StepPredictor p1(spec, a), p2(spec, b);
  auto pa = p1.params();
  auto pb = p2.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value.data == pb[i]->value.data);
}
