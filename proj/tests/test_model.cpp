// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "salatt/grad_check.hpp"
#include "salatt/model.hpp"
#include "ref_lstm.hpp"
#include "test_util.hpp"

namespace salatt {
namespace {

using test::random_tensor;
using test::Vec;

ModelConfig small_config(Variant v, RegionGrid grid = RegionGrid(4, 2, 1)) {
  ModelConfig c;
  c.variant = v;
  c.feature_dim = 5;
  c.embed_dim = 3;
  c.question_layers = 1;
  c.question_hidden = 3;
  c.common_dim = 4;
  c.vocab_size = 8;
  c.answer_count = 3;
  c.dropout_rate = 0.0;
  c.grid = grid;
  return c;
}

// Every tensor, biases included, drawn uniformly from ±range.
ParamStore random_params(const ModelConfig& c, Rng& rng, double range = 0.8) {
  ParamStore p = init_params(c, rng, range);
  for (auto& [name, e] : p) {
    for (double& v : e.value.data()) v = rng.uniform(-range, range);
  }
  return p;
}

void zero_prefix(ParamStore& p, const std::string& prefix) {
  for (auto& [name, e] : p) {
    if (name.rfind(prefix, 0) == 0) e.value.fill(0.0);
  }
}

Vec row_vec(const Tensor& t, std::size_t r) {
  auto s = t.row(r);
  return Vec(s.begin(), s.end());
}

// tanh(W x + b) for a row-major [out×in] matrix.
Vec ref_map(const Tensor& W, const Tensor& b, const Vec& x) {
  Vec out(W.shape()[0]);
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = b[r];
    for (std::size_t k = 0; k < x.size(); ++k) acc += W.at(r, k) * x[k];
    out[r] = std::tanh(acc);
  }
  return out;
}

Vec ref_softmax(const Vec& s) {
  const double m = *std::max_element(s.begin(), s.end());
  Vec e(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) z += e[i] = std::exp(s[i] - m);
  for (double& v : e) v /= z;
  return e;
}

TEST(ModelConfig, QuestionDimensionIsDerived) {
  ModelConfig c;
  c.question_layers = 2;
  c.question_hidden = 512;
  EXPECT_EQ(c.question_dim(), 2048u);
  c.variant = Variant::TraAtt;
  c.common_dim = 1024;
  EXPECT_EQ(c.classifier_input_dim(), 2048u);
  c.common_dim = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfig, VariantNames) {
  for (Variant v : all_variants()) EXPECT_EQ(parse_variant(variant_name(v)), v);
  try {
    parse_variant("SoftAtt");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("SalAtt"), std::string::npos);
  }
}

TEST(ModelParams, ShapesPerVariant) {
  for (Variant v : all_variants()) {
    const ModelConfig c = small_config(v);
    Rng rng(1);
    const ParamStore p = init_params(c, rng);
    const auto expected = expected_param_shapes(c);
    ASSERT_EQ(p.size(), expected.size());
    for (const auto& [name, shape] : expected) EXPECT_EQ(p.at(name).value.shape(), shape) << name;
    EXPECT_EQ(p.at("embedding").value.shape(), (Shape{8, 3}));
    EXPECT_EQ(p.at("visual_map.W").value.shape(), (Shape{4, 5}));
    EXPECT_EQ(p.at("question_map.W").value.shape(), (Shape{4, 6}));
    EXPECT_EQ(p.at("classifier.W").value.shape(), (Shape{3, v == Variant::TraAtt ? 8u : 4u}));
    EXPECT_EQ(p.contains("preselect.fwd.W_i"), v == Variant::SalAtt);
    EXPECT_EQ(p.contains("preselect.conv.w"), v == Variant::ConAtt);
    if (v == Variant::SalAtt) {
      EXPECT_EQ(p.at("preselect.bwd.U_o").value.shape(), (Shape{1, 1}));
    }
    if (v == Variant::ConAtt) {
      EXPECT_EQ(p.at("preselect.conv.w").value.shape(), (Shape{1, 5}));
    }
  }
}

TEST(ModelParams, InitRangeAndZeroBiases) {
  const ModelConfig c = small_config(Variant::SalAtt);
  Rng rng(2);
  const ParamStore p = init_params(c, rng, 0.08);
  for (const auto& [name, e] : p) {
    const std::string leaf = name.substr(name.rfind('.') + 1);
    const bool bias = leaf == "b" || leaf.starts_with("b_");
    for (double v : e.value.data()) {
      if (bias) {
        EXPECT_EQ(v, 0.0) << name;
      } else {
        EXPECT_GE(v, -0.08) << name;
        EXPECT_LT(v, 0.08) << name;
      }
    }
  }
}

TEST(ModelParams, CheckReportsExpectedAndFoundShapes) {
  const ModelConfig c = small_config(Variant::RegAtt);
  ModelConfig wide = c;
  wide.common_dim = 7;
  Rng rng(3);
  const ParamStore p = init_params(wide, rng);
  try {
    check_params(c, p);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[4x"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[7x"), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(check_params(wide, p));
}

TEST(Preselect, ZeroParamsGiveUniformWeights) {
  const ModelConfig c = small_config(Variant::SalAtt);
  Rng rng(4);
  ParamStore p = random_params(c, rng);
  zero_prefix(p, "preselect.");
  Tape t;
  const ModelVars vars = bind_params(t, c, p);
  const Tensor w = preselect_weights(*vars.preselect, t.constant(random_tensor({9, 5}, rng))).value();
  for (double v : w.data()) EXPECT_NEAR(v, 1.0 / 9.0, 1e-15);
}

TEST(Preselect, SingleRegionWeightIsOne) {
  const ModelConfig c = small_config(Variant::SalAtt, RegionGrid(2, 2, 1));
  Rng rng(5);
  ParamStore p = random_params(c, rng);
  Tape t;
  const ModelVars vars = bind_params(t, c, p);
  const Tensor w = preselect_weights(*vars.preselect, t.constant(random_tensor({1, 5}, rng))).value();
  EXPECT_EQ(w, Tensor::vector({1.0}));
}

TEST(Preselect, MatchesTwoPassOracle) {
  const ModelConfig c = small_config(Variant::SalAtt);
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    ParamStore p = random_params(c, rng, 1.5);
    const Tensor feats = random_tensor({9, 5}, rng, -2, 2);
    std::vector<Vec> seq;
    for (std::size_t r = 0; r < 9; ++r) seq.push_back(row_vec(feats, r));
    const auto fwd = test::ref_run(test::ref_from_store(p, "preselect.fwd"), seq);
    std::vector<Vec> rev(seq.rbegin(), seq.rend());
    const auto bwd = test::ref_run(test::ref_from_store(p, "preselect.bwd"), rev);
    Vec scores(9);
    for (std::size_t i = 0; i < 9; ++i) scores[i] = fwd[i].h[0] + bwd[8 - i].h[0];
    const Vec expected = ref_softmax(scores);

    Tape t;
    const ModelVars vars = bind_params(t, c, p);
    const Tensor w = preselect_weights(*vars.preselect, t.constant(feats)).value();
    double total = 0.0;
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_GT(w[i], 0.0);
      EXPECT_NEAR(w[i], expected[i], 1e-12);
      total += w[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Preselect, OrderSensitiveUnlikeConv) {
  const ModelConfig c = small_config(Variant::SalAtt);
  Rng rng(7);
  ParamStore p = random_params(c, rng, 1.5);
  const Tensor feats = random_tensor({9, 5}, rng, -2, 2);
  Tensor swapped = feats;
  // Swap the first and last region rows.
  for (std::size_t k = 0; k < 5; ++k) std::swap(swapped.at(0, k), swapped.at(8, k));
  Tape t;
  const ModelVars vars = bind_params(t, c, p);
  Tensor a = preselect_weights(*vars.preselect, t.constant(feats)).value();
  Tensor b = preselect_weights(*vars.preselect, t.constant(swapped)).value();
  std::sort(a.data().begin(), a.data().end());
  std::sort(b.data().begin(), b.data().end());
  EXPECT_GT(max_abs_diff(a, b), 1e-6);
}

TEST(ApplyPreselection, ScalesRows) {
  Rng rng(8);
  Tape t;
  const Tensor feats = random_tensor({9, 5}, rng);
  Var f = t.constant(feats);
  const Tensor uniform = apply_preselection(t.constant(Tensor({9}, 1.0 / 9.0)), f).value();
  for (std::size_t i = 0; i < feats.size(); ++i) EXPECT_DOUBLE_EQ(uniform[i], feats[i] / 9.0);
  Tensor hot({9});
  hot[4] = 1.0;
  const Tensor one = apply_preselection(t.constant(hot), f).value();
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(one.at(r, k), r == 4 ? feats.at(r, k) : 0.0);
  }
  EXPECT_EQ(apply_preselection(t.constant(Tensor({9}, 1.0)), f).value(), feats);
  EXPECT_THROW(apply_preselection(t.constant(Tensor({8}, 1.0)), f), DimensionError);
}

TEST(ConvPreselect, ZeroUniformOracleAndEquivariance) {
  Rng rng(9);
  Tape t;
  const Tensor feats = random_tensor({9, 5}, rng);
  const Tensor zero = conv_preselect_weights(t.constant(Tensor({1, 5})), t.constant(feats)).value();
  for (double v : zero.data()) EXPECT_NEAR(v, 1.0 / 9.0, 1e-15);

  const Tensor w = random_tensor({1, 5}, rng, -2, 2);
  Vec scores(9);
  for (std::size_t r = 0; r < 9; ++r) {
    scores[r] = 0.0;
    for (std::size_t k = 0; k < 5; ++k) scores[r] += w[k] * feats.at(r, k);
  }
  const Vec expected = ref_softmax(scores);
  const Tensor got = conv_preselect_weights(t.constant(w), t.constant(feats)).value();
  for (std::size_t r = 0; r < 9; ++r) EXPECT_NEAR(got[r], expected[r], 1e-12);

  std::vector<std::size_t> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = 8; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    Tensor permuted({9, 5});
    for (std::size_t r = 0; r < 9; ++r) {
      for (std::size_t k = 0; k < 5; ++k) permuted.at(r, k) = feats.at(perm[r], k);
    }
    const Tensor pw = conv_preselect_weights(t.constant(w), t.constant(permuted)).value();
    for (std::size_t r = 0; r < 9; ++r) EXPECT_NEAR(pw[r], got[perm[r]], 1e-15);
  }
  EXPECT_THROW(conv_preselect_weights(t.constant(Tensor({1, 4})), t.constant(feats)), DimensionError);
}

struct FusionFixture {
  ModelConfig config;
  ParamStore params;
  Tensor feats;
  Tensor question;  // d_Q
};

FusionFixture make_fusion(Variant v, std::uint64_t seed, RegionGrid grid = RegionGrid(4, 2, 1)) {
  FusionFixture f;
  f.config = small_config(v, grid);
  Rng rng(seed);
  f.params = random_params(f.config, rng);
  f.feats = random_tensor({grid.region_total(), 5}, rng, -2, 2);
  f.question = random_tensor({6}, rng);
  return f;
}

TEST(EwmFusion, ScoreIdentityAndMaxPool) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto f = make_fusion(Variant::RegAtt, seed);
    Tape t;
    const ModelVars vars = bind_params(t, f.config, f.params);
    const auto ewm = fuse_ewm_attention(t.constant(f.question), t.constant(f.feats), vars.maps);
    const Vec q = ref_map(f.params.at("question_map.W").value, f.params.at("question_map.b").value,
                          Vec(f.question.data().begin(), f.question.data().end()));
    const Tensor& per = ewm.per_region.value();
    for (std::size_t r = 0; r < 9; ++r) {
      const Vec v = ref_map(f.params.at("visual_map.W").value, f.params.at("visual_map.b").value, row_vec(f.feats, r));
      double score = 0.0, row_sum = 0.0;
      for (std::size_t j = 0; j < 4; ++j) {
        score += v[j] * q[j];
        row_sum += per.at(r, j);
        EXPECT_NEAR(per.at(r, j), v[j] * q[j], 1e-15);
      }
      EXPECT_NEAR(row_sum, score, 1e-12);
    }
    for (std::size_t j = 0; j < 4; ++j) {
      double m = per.at(0, j);
      for (std::size_t r = 1; r < 9; ++r) m = std::max(m, per.at(r, j));
      EXPECT_EQ(ewm.fused.value()[j], m);
    }
    double share = 0.0;
    for (double v : ewm.map.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      share += v;
    }
    EXPECT_NEAR(share, 1.0, 1e-12);
  }
}

TEST(EwmFusion, SingleRegionAndZeroQuestion) {
  auto f = make_fusion(Variant::RegAtt, 10, RegionGrid(3, 3, 1));
  Tape t;
  {
    const ModelVars vars = bind_params(t, f.config, f.params);
    const auto ewm = fuse_ewm_attention(t.constant(f.question), t.constant(f.feats), vars.maps);
    const Vec q = ref_map(f.params.at("question_map.W").value, f.params.at("question_map.b").value,
                          Vec(f.question.data().begin(), f.question.data().end()));
    const Vec v = ref_map(f.params.at("visual_map.W").value, f.params.at("visual_map.b").value, row_vec(f.feats, 0));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(ewm.fused.value()[j], v[j] * q[j], 1e-15);
  }
  auto g = make_fusion(Variant::RegAtt, 11);
  zero_prefix(g.params, "question_map.");
  const ModelVars vars = bind_params(t, g.config, g.params);
  const auto ewm = fuse_ewm_attention(t.constant(g.question), t.constant(g.feats), vars.maps);
  for (double v : ewm.fused.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(TraditionalFusion, EqualScoresDominanceAndOracle) {
  auto f = make_fusion(Variant::TraAtt, 12);
  {
    Tensor same({9, 5});
    for (std::size_t r = 0; r < 9; ++r) {
      for (std::size_t k = 0; k < 5; ++k) same.at(r, k) = f.feats.at(0, k);
    }
    Tape t;
    const ModelVars vars = bind_params(t, f.config, f.params);
    const auto tra = fuse_traditional_attention(t.constant(f.question), t.constant(same), vars.maps);
    for (double a : tra.alpha.value().data()) EXPECT_NEAR(a, 1.0 / 9.0, 1e-15);
  }
  Tape t;
  const ModelVars vars = bind_params(t, f.config, f.params);
  const auto tra = fuse_traditional_attention(t.constant(f.question), t.constant(f.feats), vars.maps);
  const Vec q = ref_map(f.params.at("question_map.W").value, f.params.at("question_map.b").value,
                        Vec(f.question.data().begin(), f.question.data().end()));
  std::vector<Vec> vs;
  Vec scores;
  for (std::size_t r = 0; r < 9; ++r) {
    vs.push_back(ref_map(f.params.at("visual_map.W").value, f.params.at("visual_map.b").value, row_vec(f.feats, r)));
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += vs.back()[j] * q[j];
    scores.push_back(s);
  }
  const Vec alpha = ref_softmax(scores);
  for (std::size_t r = 0; r < 9; ++r) EXPECT_NEAR(tra.alpha.value()[r], alpha[r], 1e-12);
  const Tensor& fused = tra.fused.value();
  ASSERT_EQ(fused.size(), 8u);
  for (std::size_t j = 0; j < 4; ++j) {
    double attended = 0.0;
    for (std::size_t r = 0; r < 9; ++r) attended += alpha[r] * vs[r][j];
    EXPECT_NEAR(fused[j], attended, 1e-12);
    EXPECT_NEAR(fused[4 + j], q[j], 1e-15);
  }
}

TEST(TraditionalFusion, DominantScoreSelectsRegion) {
  // Visual map with a huge weight on the first feature: the region with the
  // largest first feature saturates and, with q' aligned, wins the softmax.
  auto f = make_fusion(Variant::TraAtt, 13);
  auto& W = f.params.at("visual_map.W").value;
  W.fill(0.0);
  for (std::size_t j = 0; j < 4; ++j) W.at(j, 0) = 1.0;
  f.params.at("visual_map.b").value.fill(0.0);
  f.params.at("question_map.W").value.fill(0.0);
  f.params.at("question_map.b").value.fill(1000.0);  // q' = tanh(1000) = 1
  f.feats.fill(0.0);
  f.feats.at(5, 0) = 1000.0;  // tanh saturates to 1 per column, score 4
  for (std::size_t r = 0; r < 9; ++r) {
    if (r != 5) f.feats.at(r, 0) = -1000.0;  // score −4
  }
  Tape t;
  const ModelVars vars = bind_params(t, f.config, f.params);
  const auto tra = fuse_traditional_attention(t.constant(f.question), t.constant(f.feats), vars.maps);
  const double expected = std::exp(4.0) / (std::exp(4.0) + 8 * std::exp(-4.0));
  EXPECT_NEAR(tra.alpha.value()[5], expected, 1e-12);
  EXPECT_GT(tra.alpha.value()[5], 0.99);
}

TEST(HolisticFusion, MeanThenMapOracle) {
  auto f = make_fusion(Variant::Holistic, 14);
  Tape t;
  const ModelVars vars = bind_params(t, f.config, f.params);
  const Tensor fused = fuse_holistic(t.constant(f.question), t.constant(f.feats), vars.maps).value();
  Vec mean(5, 0.0);
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t k = 0; k < 5; ++k) mean[k] += f.feats.at(r, k) / 9.0;
  }
  const Vec v = ref_map(f.params.at("visual_map.W").value, f.params.at("visual_map.b").value, mean);
  const Vec q = ref_map(f.params.at("question_map.W").value, f.params.at("question_map.b").value,
                        Vec(f.question.data().begin(), f.question.data().end()));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(fused[j], v[j] * q[j], 1e-12);
}

TEST(HolisticFusion, IdenticalRegionsMatchEwmAndZeroQuestion) {
  auto f = make_fusion(Variant::Holistic, 15);
  Tensor same({9, 5});
  for (std::size_t r = 0; r < 9; ++r) {
    for (std::size_t k = 0; k < 5; ++k) same.at(r, k) = f.feats.at(2, k);
  }
  Tensor single({1, 5});
  for (std::size_t k = 0; k < 5; ++k) single.at(0, k) = f.feats.at(2, k);
  Tape t;
  const ModelVars vars = bind_params(t, f.config, f.params);
  const Tensor h = fuse_holistic(t.constant(f.question), t.constant(same), vars.maps).value();
  const Tensor e = fuse_ewm_attention(t.constant(f.question), t.constant(single), vars.maps).fused.value();
  EXPECT_LT(max_abs_diff(h, e), 1e-15);

  zero_prefix(f.params, "question_map.");
  Tape t2;
  const ModelVars zv = bind_params(t2, f.config, f.params);
  for (double v : fuse_holistic(t2.constant(f.question), t2.constant(f.feats), zv.maps).value().data()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(Classify, ZeroWeightsHandCaseAndShift) {
  Tape t;
  Var fused = t.constant(Tensor::vector({1, -2}));
  const Tensor zero = classify(fused, t.constant(Tensor({2, 2})), t.constant(Tensor({2}))).value();
  EXPECT_EQ(zero[0], zero[1]);
  const Tensor hand =
      classify(fused, t.constant(Tensor::matrix({{1, 1}, {2, -1}})), t.constant(Tensor::vector({0.5, 0}))).value();
  EXPECT_EQ(hand, Tensor::vector({-0.5, 4}));
  EXPECT_EQ(argmax(hand), 1u);
  EXPECT_EQ(argmax(Tensor::vector({3.5, 7})), 1u);
  EXPECT_EQ(argmax(Tensor::vector({2, 2, 1})), 0u);
  EXPECT_THROW(classify(fused, t.constant(Tensor({2, 3})), t.constant(Tensor({2}))), DimensionError);
}

TEST(Forward, EveryVariantGivesFiniteLogits) {
  for (Variant v : all_variants()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto f = make_fusion(v, 100 + seed);
      Rng rng(seed);
      std::vector<std::size_t> q = {1, rng.below(8), rng.below(8)};
      Tape t;
      const auto tr = forward(t, f.config, f.params, {f.feats, q});
      EXPECT_EQ(tr.logits.value().size(), 3u);
      EXPECT_TRUE(tr.logits.value().all_finite());
      EXPECT_EQ(tr.attention_map.size(), 9u);
      EXPECT_EQ(tr.preselect_weights.has_value(), v == Variant::SalAtt || v == Variant::ConAtt);
      if (tr.preselect_weights) {
        EXPECT_NEAR(std::accumulate(tr.preselect_weights->data().begin(), tr.preselect_weights->data().end(), 0.0),
                    1.0, 1e-9);
      }
    }
  }
}

TEST(Forward, EvalModeIsDeterministic) {
  auto f = make_fusion(Variant::SalAtt, 16);
  f.config.dropout_rate = 0.3;
  std::vector<std::size_t> q = {1, 2, 3};
  Tape a, b;
  EXPECT_EQ(forward(a, f.config, f.params, {f.feats, q}).logits.value(),
            forward(b, f.config, f.params, {f.feats, q}).logits.value());
}

TEST(Forward, TrainModeDropoutFollowsSeed) {
  auto f = make_fusion(Variant::RegAtt, 17);
  f.config.dropout_rate = 0.5;
  std::vector<std::size_t> q = {1, 2, 3};
  Rng r1(5), r2(5), r3(6);
  Tape a, b, c;
  const Tensor x = forward(a, f.config, f.params, {f.feats, q}, {Mode::Train, &r1}).logits.value();
  const Tensor y = forward(b, f.config, f.params, {f.feats, q}, {Mode::Train, &r2}).logits.value();
  const Tensor z = forward(c, f.config, f.params, {f.feats, q}, {Mode::Train, &r3}).logits.value();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  Tape d;
  EXPECT_THROW(forward(d, f.config, f.params, {f.feats, q}, {Mode::Train, nullptr}), ArgumentError);
}

TEST(Forward, ZeroPreselectionEqualsScaledRegAtt) {
  auto f = make_fusion(Variant::SalAtt, 18);
  zero_prefix(f.params, "preselect.");
  ModelConfig reg = f.config;
  reg.variant = Variant::RegAtt;
  ParamStore reg_params;
  for (const auto& [name, e] : f.params) {
    if (name.rfind("preselect.", 0) != 0) reg_params.add(name, e.value);
  }
  Tensor scaled = f.feats;
  scaled *= 1.0 / 9.0;
  std::vector<std::size_t> q = {4, 1, 7};
  Tape a, b;
  const Tensor sal = forward(a, f.config, f.params, {f.feats, q}).logits.value();
  const Tensor ra = forward(b, reg, reg_params, {scaled, q}).logits.value();
  EXPECT_LT(max_abs_diff(sal, ra), 1e-15);
}

TEST(Forward, SingleRegionVariantsAgree) {
  const RegionGrid one(2, 2, 1);
  auto f = make_fusion(Variant::SalAtt, 19, one);
  std::vector<std::size_t> q = {3, 5};
  Tape t0;
  const Tensor sal = forward(t0, f.config, f.params, {f.feats, q}).logits.value();
  for (Variant v : {Variant::RegAtt, Variant::Holistic}) {
    ModelConfig c = f.config;
    c.variant = v;
    ParamStore p;
    for (const auto& [name, e] : f.params) {
      if (name.rfind("preselect.", 0) != 0) p.add(name, e.value);
    }
    Tape t;
    EXPECT_LT(max_abs_diff(forward(t, c, p, {f.feats, q}).logits.value(), sal), 1e-15) << variant_name(v);
  }
}

TEST(Forward, RejectsMismatchedInput) {
  auto f = make_fusion(Variant::RegAtt, 20);
  Tape t;
  std::vector<std::size_t> q = {1};
  EXPECT_THROW(forward(t, f.config, f.params, {Tensor({8, 5}), q}), DimensionError);
  std::vector<std::size_t> empty;
  EXPECT_THROW(forward(t, f.config, f.params, {f.feats, empty}), ArgumentError);
  std::vector<std::size_t> oov = {8};
  EXPECT_THROW(forward(t, f.config, f.params, {f.feats, oov}), ArgumentError);
}

TEST(Forward, SalAttGradientCheckAtToyDims) {
  ModelConfig c = small_config(Variant::SalAtt);
  c.feature_dim = 8;
  c.common_dim = 6;
  c.question_hidden = 5;
  c.vocab_size = 11;
  c.answer_count = 4;
  c.embed_dim = 4;
  c.dropout_rate = 0.2;
  Rng rng(1);
  ParamStore p = init_params(c, rng, 1.0);
  Tensor feats({9, 8});
  for (double& x : feats.data()) x = rng.normal();
  const std::vector<std::size_t> q = {2, 7, 1, 9};
  const LossFn loss = [&](Tape& t, ParamStore& ps) {
    Rng drop(77);
    return cross_entropy(forward(t, c, ps, {feats, q}, {Mode::Train, &drop}).logits, 1);
  };
  for (const auto& name : p.names()) EXPECT_LT(grad_check_param(p, name, loss).max_rel_error, 1e-4) << name;
}

}  // namespace
}  // namespace salatt
