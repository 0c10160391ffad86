#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "dwa/dataset.hpp"
#include "dwa/loss.hpp"
#include "dwa/optim.hpp"
#include "dwa/selfcheck.hpp"
#include "dwa/synthetic.hpp"
#include "dwa/train.hpp"

namespace dwa {
namespace {

using selfcheck::random_tensor;

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

TEST(Loss, ZeroForEqualInputs) {
  Rng rng(1);
  const auto x = random_tensor<double>({1, 3, 4, 4}, rng);
  EXPECT_EQ(l1_loss(x, x).item(), 0.0);
  EXPECT_EQ(l2_loss(x, x).item(), 0.0);
}

TEST(Loss, ConstantDifference) {
  const auto t = Tensor<double>::filled({2, 3, 4, 4}, 0.25);
  const auto p = Tensor<double>::filled({2, 3, 4, 4}, 0.75);
  EXPECT_DOUBLE_EQ(l1_loss(p, t).item(), 0.5);
  EXPECT_DOUBLE_EQ(l2_loss(p, t).item(), 0.25);
  EXPECT_DOUBLE_EQ(loss(LossKind::l1, p, t).item(), 0.5);
}

TEST(Loss, L2GradientIsTwoDeltaOverN) {
  Rng rng(2);
  const auto t = random_tensor<double>({1, 2, 3, 3}, rng);
  const auto delta = random_tensor<double>({1, 2, 3, 3}, rng);
  const auto p = add(t, delta).as_parameter();
  const auto g = backward(l2_loss(p, t)).of(p);
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 2.0 * delta[i] / n, 1e-15);
  const ScalarFn f = [&](std::span<const Tensor<double>> q) { return l2_loss(q[0], t); };
  EXPECT_TRUE(grad_check(f, {p}).pass);
}

TEST(Loss, ShapeMismatch) {
  EXPECT_THROW(l1_loss(Tensor<double>::zeros({1, 1, 2, 2}), Tensor<double>::zeros({1, 1, 2, 3})), Error);
}

TEST(Loss, Names) {
  EXPECT_EQ(parse_loss_kind("l2"), LossKind::l2);
  EXPECT_FALSE(parse_loss_kind("huber"));
}

TEST(Adam, ZeroGradientIsIdentity) {
  Rng rng(3);
  const auto p = random_tensor<double>({1, 2, 3, 3}, rng).as_parameter();
  AdamState<double> state;
  auto next = adam_step<double>({p}, {std::vector<double>(p.size(), 0.0)}, state, 1e-3, 0.0);
  EXPECT_EQ(values(next[0]), values(p));
  next = adam_step<double>(next, {std::vector<double>(p.size(), 0.0)}, state, 1e-3, 0.0);
  EXPECT_EQ(values(next[0]), values(p));
}

TEST(Adam, FirstStepIsLrTimesSign) {
  const double lr = 1e-4;
  const auto p = Tensor<double>::parameter({1, 1, 1, 4}, {0.5, -0.5, 0.0, 2.0});
  const std::vector<double> g{0.3, -2.0, 0.01, -0.05};
  AdamState<double> state;
  const auto next = adam_step<double>({p}, {g}, state, lr, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double expected = p[i] - lr * (g[i] > 0 ? 1.0 : -1.0);
    EXPECT_NEAR(next[0][i], expected, 1e-6 * lr);
  }
}

TEST(Adam, CoupledL2) {
  // With g = 0 the decay term alone drives the first step: -lr * sign(theta).
  const auto p = Tensor<double>::parameter({1, 1, 1, 2}, {1.0, -3.0});
  AdamState<double> state;
  const auto next = adam_step<double>({p}, {{0.0, 0.0}}, state, 1e-3, 1e-2);
  EXPECT_NEAR(next[0][0], 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(next[0][1], -3.0 + 1e-3, 1e-9);
}

TEST(Adam, DeterministicOverSteps) {
  auto run = [] {
    Rng rng(4);
    auto p = random_tensor<float>({1, 2, 3, 3}, rng).as_parameter();
    std::vector<Tensor<float>> params{p};
    AdamState<float> state;
    for (int s = 0; s < 20; ++s) {
      std::vector<float> g(p.size());
      for (auto& v : g) v = static_cast<float>(rng.uniform(-1, 1));
      params = adam_step<float>(params, {g}, state, 1e-3, 1e-8);
    }
    return std::vector<float>(params[0].data().begin(), params[0].data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, LengthMismatch) {
  const auto p = Tensor<double>::parameter({1, 1, 1, 2}, {1.0, 2.0});
  AdamState<double> state;
  EXPECT_THROW(adam_step<double>({p}, {{1.0}}, state, 1e-3, 0.0), Error);
  EXPECT_THROW(adam_step<double>({p}, {}, state, 1e-3, 0.0), Error);
}

TEST(Schedule, StatedValues) {
  const TrainConfig cfg;
  EXPECT_EQ(lr_at_epoch(0, cfg), 1e-4);
  EXPECT_EQ(lr_at_epoch(19, cfg), 1e-4);
  EXPECT_EQ(lr_at_epoch(20, cfg), 8e-5);
  EXPECT_NEAR(lr_at_epoch(40, cfg), 6.4e-5, 1e-19);
  EXPECT_NEAR(lr_at_epoch(59, cfg), 6.4e-5, 1e-19);
  EXPECT_NEAR(lr_at_epoch(60, cfg), 5.12e-5, 1e-19);
}

TEST(Schedule, MatchesClosedForm) {
  const TrainConfig cfg;
  for (std::size_t e = 0; e < 200; ++e) {
    EXPECT_EQ(lr_at_epoch(e, cfg), 1e-4 * std::pow(0.8, static_cast<double>(e / 20))) << "epoch " << e;
  }
}

Tensor<double> grid_2x3() { return Tensor<double>::create({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6}); }

TEST(Dihedral, IdentityAndExamples) {
  const auto x = grid_2x3();
  EXPECT_EQ(values(dihedral(x, 0)), values(x));
  // One counter-clockwise quarter turn: the last column becomes the first row.
  const auto r = dihedral(x, 1);
  EXPECT_EQ(r.shape(), (Shape{1, 1, 3, 2}));
  EXPECT_EQ(values(r), (std::vector<double>{3, 6, 2, 5, 1, 4}));
  EXPECT_EQ(values(dihedral(x, 2)), (std::vector<double>{6, 5, 4, 3, 2, 1}));
  EXPECT_EQ(values(dihedral(x, 4)), (std::vector<double>{3, 2, 1, 6, 5, 4}));
}

TEST(Dihedral, GroupProperties) {
  Rng rng(5);
  const auto x = random_tensor<double>({2, 3, 5, 7}, rng);
  auto y = x;
  for (int i = 0; i < 4; ++i) y = dihedral(y, 1);
  EXPECT_EQ(values(y), values(x));
  EXPECT_EQ(values(dihedral(dihedral(x, 4), 4)), values(x));
  // Quarter turn composed with itself is the half turn.
  EXPECT_EQ(values(dihedral(dihedral(x, 1), 1)), values(dihedral(x, 2)));
  // All eight elements are distinct on an asymmetric image.
  std::set<std::vector<double>> seen;
  for (int t = 0; t < 8; ++t) seen.insert(values(dihedral(x, t)));
  EXPECT_EQ(seen.size(), 8u);
}

TEST(Dihedral, EveryElementHasAnInverse) {
  Rng rng(6);
  const auto x = random_tensor<double>({1, 1, 4, 6}, rng);
  for (int t = 0; t < 8; ++t) {
    int found = 0;
    for (int u = 0; u < 8; ++u) found += values(dihedral(dihedral(x, t), u)) == values(x);
    EXPECT_EQ(found, 1) << "transform " << t;
  }
}

TEST(Dihedral, BadId) {
  try {
    dihedral(grid_2x3(), 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadTransformId);
  }
}

Dataset<float> small_dataset(int scale, std::size_t count = 3, std::size_t size = 64) {
  return make_dataset(gen_synthetic<float>(11, count, size), scale, 2 * static_cast<std::size_t>(scale));
}

TEST(Sampler, Deterministic) {
  const auto ds = small_dataset(2);
  const auto a = sample_patches(ds, 32, 4, 99);
  const auto b = sample_patches(ds, 32, 4, 99);
  EXPECT_EQ(a.image_index, b.image_index);
  EXPECT_EQ(a.origin_y, b.origin_y);
  EXPECT_EQ(a.transform, b.transform);
  EXPECT_TRUE(std::equal(a.hr.data().begin(), a.hr.data().end(), b.hr.data().begin()));
  EXPECT_TRUE(std::equal(a.lr.data().begin(), a.lr.data().end(), b.lr.data().begin()));
}

TEST(Sampler, OriginsAlignedToScale) {
  for (const int r : {2, 3, 4}) {
    const auto ds = small_dataset(r, 2, 60);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto batch = sample_patches(ds, static_cast<std::size_t>(12 * r), 3, seed);
      for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(batch.origin_y[i] % static_cast<std::size_t>(r), 0u);
        EXPECT_EQ(batch.origin_x[i] % static_cast<std::size_t>(r), 0u);
      }
    }
  }
}

TEST(Sampler, PatchesAreAlignedPairs) {
  // The untransformed LR patch is the LR image at origin / r.
  const auto ds = small_dataset(2);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto batch = sample_patches(ds, 16, 1, seed);
    const auto& item = ds.items[batch.image_index[0]];
    const int inverse = [&] {
      for (int u = 0; u < 8; ++u)
        if (values(dihedral(dihedral(grid_2x3(), batch.transform[0]), u)) == values(grid_2x3())) return u;
      return -1;
    }();
    const auto hr = dihedral(batch.hr, inverse);
    const auto lr = dihedral(batch.lr, inverse);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
          ASSERT_EQ(lr(0, c, i, j), item.lr(0, c, batch.origin_y[0] / 2 + i, batch.origin_x[0] / 2 + j));
          ASSERT_EQ(hr(0, c, 2 * i, 2 * j), item.hr(0, c, batch.origin_y[0] + 2 * i, batch.origin_x[0] + 2 * j));
        }
  }
}

TEST(Sampler, ImageTooSmall) {
  const auto ds = small_dataset(2);
  try {
    sample_patches(ds, 192, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ImageTooSmall);
  }
}

TEST(Sampler, EmptyDataset) {
  Dataset<float> ds;
  try {
    sample_patches(ds, 32, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
}

ModelConfig tiny_model() {
  ModelConfig mc;
  mc.kind = ModelKind::dwsr_dwa;
  mc.depth = 4;
  mc.width = 8;
  mc.scale = 2;
  return mc;
}

TrainConfig tiny_train() {
  TrainConfig tc;
  tc.batch_size = 2;
  tc.patch_size = 16;
  tc.steps_per_epoch = 3;
  tc.epochs = 2;
  tc.seed = 5;
  return tc;
}

TEST(Train, EmptyDatasetFailsBeforeAnyStep) {
  Dataset<float> ds;
  std::size_t calls = 0;
  try {
    train(tiny_model(), tiny_train(), ds, nullptr, [&](const StepRecord&) { ++calls; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
  }
  EXPECT_EQ(calls, 0u);
}

TEST(Train, InvalidPatchRejected) {
  auto tc = tiny_train();
  tc.patch_size = 18;  // not a multiple of 4 at x2
  EXPECT_THROW(train(tiny_model(), tc, small_dataset(2), nullptr), Error);
}

TEST(Train, Deterministic) {
  const auto ds = small_dataset(2);
  const auto a = train(tiny_model(), tiny_train(), ds, &ds);
  const auto b = train(tiny_model(), tiny_train(), ds, &ds);
  EXPECT_EQ(format_history(a.history), format_history(b.history));
  const auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    EXPECT_TRUE(std::equal(pa[i].data().begin(), pa[i].data().end(), pb[i].data().begin()));
  EXPECT_EQ(a.steps, 6u);
}

TEST(Train, HistoryFormat) {
  TrainHistory h;
  h.steps.push_back({0, 0, 1e-4, 0.5});
  h.epochs.push_back({0, 1e-4, std::nullopt, std::nullopt});
  h.steps.push_back({1, 1, 8e-5, 0.25});
  h.epochs.push_back({1, 8e-5, 30.5, 0.875});
  EXPECT_EQ(format_history(h),
            "step 0 epoch 0 lr 0.0001 loss 0.5\n"
            "epoch 0 lr 0.0001 val_psnr none val_ssim none\n"
            "step 1 epoch 1 lr 8.0000000000000007e-05 loss 0.25\n"
            "epoch 1 lr 8.0000000000000007e-05 val_psnr 30.5 val_ssim 0.875\n");
  EXPECT_EQ(format_double(kInfinitePsnr), "inf");
}

TEST(Train, LoggedRatesFollowSchedule) {
  auto tc = tiny_train();
  tc.epochs = 45;
  tc.steps_per_epoch = 1;
  tc.batch_size = 1;
  const auto res = train(tiny_model(), tc, small_dataset(2, 1), nullptr);
  for (const auto& s : res.history.steps) EXPECT_EQ(s.lr, lr_at_epoch(s.epoch, tc));
  EXPECT_EQ(res.history.epochs[20].lr, 8e-5);
  EXPECT_NEAR(res.history.epochs[40].lr, 6.4e-5, 1e-19);
}

TEST(Train, OverfitsSingleImage) {
  ModelConfig mc = tiny_model();
  mc.width = 16;
  TrainConfig tc;
  tc.batch_size = 4;
  tc.patch_size = 32;
  tc.steps_per_epoch = 20;
  tc.epochs = 10;
  tc.seed = 0;
  const auto ds = make_dataset(gen_synthetic<float>(0, 1, 64), 2, mc.spatial_multiple());
  const auto res = train(mc, tc, ds, nullptr);
  ASSERT_EQ(res.history.steps.size(), 200u);
  EXPECT_LT(res.history.steps.back().loss, 0.5 * res.history.steps.front().loss);
}

TEST(Evaluate, ZeroModelScoresAsBicubic) {
  const auto ds = small_dataset(2, 2);
  ModelConfig mc = tiny_model();
  mc.kind = ModelKind::dwa_direct_dwsr;  // exact identity, so PSNR matches bitwise
  const auto m = Model<float>::zeros(mc);
  const auto scores = evaluate(m, ds);
  double expect = 0.0;
  for (const auto& item : ds.items) expect += psnr(m.baseline(item.lr), item.hr);
  EXPECT_NEAR(scores.psnr, expect / 2.0, 1e-9);
}

TEST(Defaults, FamilyTrainConfig) {
  EXPECT_EQ(default_train_config(ModelKind::dwsr).loss, LossKind::l1);
  EXPECT_EQ(default_train_config(ModelKind::mwcnn_mini).loss, LossKind::l2);
  EXPECT_EQ(default_train_config(ModelKind::mwcnn_mini).patch_size, 240u);
  EXPECT_EQ(default_train_config(ModelKind::dwsr).lr0, 1e-4);
  EXPECT_EQ(default_train_config(ModelKind::dwsr).l2_reg, 1e-8);
}

}  // namespace
}  // namespace dwa
