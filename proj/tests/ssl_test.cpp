#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "ssl_lab/ssl/methods.hpp"
#include "test_support.hpp"

using namespace ssl_lab;
using namespace ssl_lab::testing;

namespace {

// Class c draws topic tokens from its own id band plus shared filler tokens.
std::vector<EncodedSample> toy_samples(std::size_t n, bool labeled, Rng& rng, std::int64_t first_id = 0) {
  std::vector<EncodedSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = uniform_index(rng, kNumClasses);
    EncodedSample s;
    s.id = first_id + static_cast<std::int64_t>(i);
    s.token_ids.assign(10, kPadId);
    s.attention_mask.assign(10, 0);
    const std::size_t len = 3 + uniform_index(rng, 7);
    for (std::size_t t = 0; t < len; ++t) {
      const bool topic = uniform01(rng) < 0.5;
      s.token_ids[t] = static_cast<std::int32_t>(topic ? 2 + 8 * c + uniform_index(rng, 8) : 34 + uniform_index(rng, 20));
      s.attention_mask[t] = 1;
    }
    if (labeled) s.label = class_from_index(c);
    out.push_back(std::move(s));
  }
  return out;
}

TrainData toy_data(std::size_t nl, std::size_t nu, std::uint64_t seed = 11) {
  Rng rng(seed);
  TrainData d;
  d.labeled = toy_samples(nl, true, rng);
  d.unlabeled = toy_samples(nu, false, rng, 100000);
  return d;
}

RunSpec toy_spec(std::uint64_t seed = 3) {
  RunSpec spec;
  spec.model.vocab_size = 54;
  spec.model.embed_dim = 8;
  spec.model.hidden_dims = {12, 8};
  spec.method.epochs = 3;
  spec.seed = seed;
  return spec;
}

using Trajectory = std::vector<std::vector<Matrix>>;

Trajectory trajectory(Method m, const TrainData& d, RunSpec spec) {
  Trajectory out;
  spec.hooks.on_step = [&](const StepRecord&, const Classifier& live) {
    std::vector<Matrix> snap;
    for (const Matrix* p : live.parameters()) snap.push_back(*p);
    out.push_back(std::move(snap));
  };
  train(m, d, spec);
  return out;
}

// max |a - b| relative to the largest reference entry
double scaled_error(const Matrix& a, const Matrix& ref) {
  double diff = 0.0, scale = 1e-8;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a.values()[i] - ref.values()[i]));
    scale = std::max(scale, std::abs(ref.values()[i]));
  }
  return diff / scale;
}

}  // namespace

// ---------------------------------------------------------------------------
// Primitives

TEST(PseudoLabel, ThresholdBoundaryAndTies) {
  auto pl = pseudo_label(Matrix::from_rows({{0.95, 0.03, 0.01, 0.01}, {0.89, 0.05, 0.03, 0.03}, {0.4, 0.4, 0.1, 0.1}}), 0.9);
  EXPECT_EQ(pl.labels[0], 0u);
  EXPECT_EQ(pl.mask[0], 1);
  EXPECT_EQ(pl.mask[1], 0);
  EXPECT_EQ(pl.labels[2], 0u);
  auto all = pseudo_label(Matrix::from_rows({{0.25, 0.25, 0.25, 0.25}, {0.0, 1.0, 0.0, 0.0}}), 0.0);
  EXPECT_EQ(all.count(), 2u);
  auto exact = pseudo_label(Matrix::from_rows({{0.9, 0.1}}), 0.9);
  EXPECT_EQ(exact.mask[0], 1);
}

TEST(PseudoLabel, MaskMonotoneInThreshold) {
  Rng rng(1);
  const Matrix p = random_distribution_rows(200, 4, rng);
  std::size_t prev = p.rows() + 1;
  for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
    auto pl = pseudo_label(p, tau);
    EXPECT_LE(pl.count(), prev);
    prev = pl.count();
  }
}

TEST(Sharpen, ExamplesAndProperties) {
  const std::vector<double> p{0.6, 0.4};
  auto q = sharpen(p, 0.5);
  EXPECT_NEAR(q[0], 0.36 / 0.52, 1e-15);
  EXPECT_NEAR(q[0], 0.6923, 1e-4);
  EXPECT_NEAR(q[1], 0.3077, 1e-4);
  auto id = sharpen(p, 1.0);
  EXPECT_NEAR(id[0], 0.6, 1e-15);
  const std::vector<double> u(4, 0.25);
  for (double v : sharpen(u, 0.3)) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_THROW(sharpen(p, 0.0), Error);
  EXPECT_THROW(sharpen(p, -1.0), Error);

  Rng rng(2);
  const Matrix rows = random_distribution_rows(300, 4, rng);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (double t : {0.2, 0.5, 0.9}) {
      auto s = sharpen(rows.row(r), t);
      double sum = 0.0;
      for (double v : s) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_EQ(argmax(s), argmax(rows.row(r)));
      EXPECT_GE(s[argmax(s)], rows(r, argmax(rows.row(r))) - 1e-15);
    }
  }
}

TEST(ConsistencySchedule, ClosedForm) {
  EXPECT_NEAR(consistency_weight(0, 100, 1.0), std::exp(-5.0), 1e-9);
  EXPECT_NEAR(consistency_weight(0, 100, 1.0), 0.00674, 1e-5);
  EXPECT_NEAR(consistency_weight(50, 100, 1.0), std::exp(-1.25), 1e-9);
  EXPECT_NEAR(consistency_weight(50, 100, 1.0), 0.2865, 1e-4);
  EXPECT_EQ(consistency_weight(100, 100, 2.5), 2.5);
  EXPECT_EQ(consistency_weight(1000, 100, 2.5), 2.5);
  EXPECT_NEAR(consistency_weight(0, 100, 3.0), 3.0 * std::exp(-5.0), 1e-9);
}

TEST(FreeMatchThresholds, InitConvergenceAndArgmax) {
  FreeMatchThresholds st(4, 0.999);
  EXPECT_DOUBLE_EQ(st.global(), 0.25);
  for (double t : st.thresholds()) EXPECT_DOUBLE_EQ(t, 0.25);
  const Matrix batch = Matrix::from_rows({{0.7, 0.1, 0.1, 0.1}, {0.1, 0.5, 0.2, 0.2}, {0.2, 0.2, 0.3, 0.3}});
  const double mean_max = (0.7 + 0.5 + 0.3) / 3.0;
  for (int i = 0; i < 20000; ++i) {
    st.update(batch);
    auto t = st.thresholds();
    const auto& pc = st.class_mean();
    EXPECT_EQ(t[argmax(pc)], st.global());
  }
  EXPECT_NEAR(st.global(), mean_max, 1e-3);
  EXPECT_NEAR(st.class_mean()[0], (0.7 + 0.1 + 0.2) / 3.0, 1e-3);

  FreeMatchThresholds frozen(4, 0.5);
  frozen.freeze(0.9);
  frozen.update(batch);
  for (double t : frozen.thresholds()) EXPECT_EQ(t, 0.9);
}

TEST(Contrastive, DegenerateCases) {
  const Matrix one = Matrix::from_rows({{1, 0}, {0, 1}});
  const std::vector<std::size_t> labels{0, 1};
  auto single = contrastive_loss(one, labels, std::vector<double>{0.9, 0.1}, 0.7, 0.07);
  EXPECT_EQ(single.loss, 0.0);
  EXPECT_EQ(single.anchors, 1u);
  auto none = contrastive_loss(one, labels, std::vector<double>{0.1, 0.1}, 0.7, 0.07);
  EXPECT_EQ(none.loss, 0.0);
  EXPECT_EQ(none.anchors, 0u);
  const Matrix same = Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}});
  auto pair = contrastive_loss(same, std::vector<std::size_t>{2, 2}, std::vector<double>{1, 1}, 0.7, 0.07);
  EXPECT_NEAR(pair.loss, 0.0, 1e-15);
}

TEST(Contrastive, FourSampleHandOracle) {
  // unit vectors at angles 0, 30, 90, 120 degrees; labels pair up (0,1) and (2,3)
  const double pi = std::acos(-1.0);
  Matrix z(4, 2);
  const double deg[] = {0, 30, 90, 120};
  for (int i = 0; i < 4; ++i) {
    z(i, 0) = std::cos(deg[i] * pi / 180);
    z(i, 1) = std::sin(deg[i] * pi / 180);
  }
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const double t = 0.5;
  auto term = contrastive_loss(z, labels, std::vector<double>{1, 1, 1, 1}, 0.7, t);
  // cos of pairwise angle differences
  auto e = [&](double a) { return std::exp(std::cos(a * pi / 180) / t); };
  const double l0 = -std::log(e(30) / (e(30) + e(90) + e(120)));
  const double l1 = -std::log(e(30) / (e(30) + e(60) + e(90)));
  const double l2 = -std::log(e(30) / (e(90) + e(60) + e(30)));
  const double l3 = -std::log(e(30) / (e(120) + e(90) + e(30)));
  EXPECT_NEAR(term.loss, (l0 + l1 + l2 + l3) / 4.0, 1e-12);

  // sample 3 below threshold: it stops being an anchor and a positive, so sample 2 has no positive
  auto partial = contrastive_loss(z, labels, std::vector<double>{1, 1, 1, 0.5}, 0.7, t);
  EXPECT_EQ(partial.anchors, 3u);
  EXPECT_NEAR(partial.loss, (l0 + l1) / 3.0, 1e-12);
}

TEST(Contrastive, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 3 + uniform_index(rng, 8);
    Matrix z(n, 4);
    std::normal_distribution<double> g;
    for (double& v : z.values()) v = g(rng);
    std::vector<std::size_t> labels;
    std::vector<double> conf;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(uniform_index(rng, 3));
      conf.push_back(uniform01(rng));
    }
    const double temp = 0.1 + uniform01(rng);
    const auto term = contrastive_loss(z, labels, conf, 0.3, temp);
    std::vector<Matrix*> params{&z};
    auto fd = finite_difference(params, [&] { return contrastive_loss(z, labels, conf, 0.3, temp).loss; });
    EXPECT_LE(scaled_error(term.dz, fd[0]), 1e-5) << "rep " << rep;
  }
}

TEST(Fairness, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix p = random_distribution_rows(7, 4, rng);
    const PseudoLabels pl = pseudo_label(p, 0.3);
    Matrix state = random_distribution_rows(2, 4, rng);
    const std::vector<double> mean(state.row(0).begin(), state.row(0).end());
    const std::vector<double> hist(state.row(1).begin(), state.row(1).end());
    const FairnessTerm f = fairness_term(p, pl, mean, hist);
    std::vector<Matrix*> params{&p};
    auto fd = finite_difference(params, [&] { return fairness_term(p, pl, mean, hist).loss; });
    EXPECT_LE(scaled_error(f.dprobs, fd[0]), 1e-5) << "rep " << rep;
  }
  Matrix p = random_distribution_rows(5, 4, rng);
  const std::vector<double> uniform(4, 0.25);
  PseudoLabels empty = pseudo_label(p, 1.01);
  EXPECT_EQ(fairness_term(p, empty, uniform, uniform).loss, 0.0);
}

TEST(Fairness, DescentMovesAwayFromOverpredictedClass) {
  // History leans on class 0; every class appears in the batch.
  const std::vector<double> mean{0.7, 0.1, 0.1, 0.1}, hist(4, 0.25);
  Matrix p(4, 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 0; k < 4; ++k) p(r, k) = k == r ? 0.7 : 0.1;
  const FairnessTerm f = fairness_term(p, pseudo_label(p, 0.0), mean, hist);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t k = 1; k < 4; ++k) EXPECT_GT(f.dprobs(r, 0), f.dprobs(r, k));
}

TEST(SganLosses, LogitGradientsMatchFiniteDifferences) {
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix logits(6, 5);
    std::normal_distribution<double> g(0.0, 2.0);
    for (double& v : logits.values()) v = g(rng);
    auto eval = [&](bool real, Matrix* grad) {
      ForwardTrace t;
      t.logits = logits;
      t.probs = softmax_rows(logits);
      Matrix d(6, 5);
      const double l = real ? detail::real_loss(t, 1.0 / 6, d) : detail::fake_loss(t, 1.0 / 6, d);
      if (grad) *grad = d;
      return l;
    };
    for (bool real : {true, false}) {
      Matrix analytic;
      eval(real, &analytic);
      std::vector<Matrix*> params{&logits};
      auto fd = finite_difference(params, [&] { return eval(real, nullptr); });
      EXPECT_LE(scaled_error(analytic, fd[0]), 1e-5);
    }
    const Matrix p = softmax_rows(logits);
    ForwardTrace t;
    t.logits = logits;
    t.probs = p;
    Matrix d(6, 5);
    double direct = 0.0;
    for (std::size_t r = 0; r < 6; ++r) direct -= std::log(1.0 - p(r, 4)) / 6;
    EXPECT_NEAR(detail::real_loss(t, 1.0 / 6, d), direct, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Reductions

TEST(ReductionLadder, ZeroWeightVariantsReplaySupervisedBitForBit) {
  const TrainData d = toy_data(40, 120);
  const RunSpec base = toy_spec();
  const Trajectory sup = trajectory(Method::Supervised, d, base);
  ASSERT_EQ(sup.size(), 9u);  // 3 epochs of ceil(40/16) steps

  RunSpec fm = base;
  fm.method.fixmatch.unsupervised_weight = 0.0;
  fm.method.fixmatch.confidence_threshold = 0.25;  // max prob >= 1/C, so every row passes
  EXPECT_TRUE(trajectory(Method::FixMatch, d, fm) == sup);

  RunSpec free = base;
  free.method.freematch.frozen_threshold = 0.25;
  free.method.freematch.fairness_weight = 0.0;
  free.method.freematch.unsupervised_weight = 0.0;
  free.method.freematch.batch_size = base.method.batch_size;
  EXPECT_TRUE(trajectory(Method::FreeMatch, d, free) == sup);

  RunSpec mt = base;
  mt.method.meanteacher.consistency_max_weight = 0.0;
  EXPECT_TRUE(trajectory(Method::MeanTeacher, d, mt) == sup);

  RunSpec fm_on = base;
  fm_on.method.fixmatch.confidence_threshold = 0.25;
  EXPECT_FALSE(trajectory(Method::FixMatch, d, fm_on) == sup);
}

TEST(ReductionLadder, FrozenFreeMatchAndZeroContrastiveReplayFixMatch) {
  const TrainData d = toy_data(40, 120);
  RunSpec fm = toy_spec();
  fm.method.fixmatch.confidence_threshold = 0.25;
  const Trajectory ref = trajectory(Method::FixMatch, d, fm);

  RunSpec free = fm;
  free.method.freematch.frozen_threshold = 0.25;
  free.method.freematch.fairness_weight = 0.0;
  free.method.freematch.batch_size = fm.method.batch_size;
  EXPECT_TRUE(trajectory(Method::FreeMatch, d, free) == ref);

  RunSpec fm7 = fm;
  fm7.method.fixmatch.confidence_threshold = 0.7;
  RunSpec cr = fm;
  cr.method.cr.contrastive_weight = 0.0;
  cr.method.cr.unsup_threshold = 0.7;
  const Trajectory cr_traj = trajectory(Method::FixMatchCr, d, cr);
  EXPECT_TRUE(cr_traj == trajectory(Method::FixMatch, d, fm7));
  cr.method.cr.contrastive_weight = 1.0;
  cr.method.cr.contrastive_threshold = 0.25;
  EXPECT_FALSE(trajectory(Method::FixMatchCr, d, cr) == cr_traj);
}

TEST(FixMatch, UnreachableThresholdGivesZeroUnsupervisedLoss) {
  const TrainData d = toy_data(30, 60);
  RunSpec spec = toy_spec();
  spec.method.fixmatch.confidence_threshold = 1.0;
  std::size_t steps = 0;
  spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) {
    ++steps;
    EXPECT_EQ(r.terms.at(1).first, "unsupervised");
    EXPECT_EQ(r.terms.at(1).second, 0.0);
    EXPECT_EQ(*r.mask_rate, 0.0);
  };
  train(Method::FixMatch, d, spec);
  EXPECT_EQ(steps, 6u);
}

TEST(FreeMatch, EmptyMaskStepHasZeroTerms) {
  const TrainData d = toy_data(30, 60);
  RunSpec spec = toy_spec();
  spec.method.freematch.frozen_threshold = 1.0;
  spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) {
    EXPECT_EQ(r.terms.at(1).second, 0.0);
    EXPECT_EQ(r.terms.at(2).second, 0.0);
  };
  train(Method::FreeMatch, d, spec);
}

TEST(MeanTeacher, ZeroDecayTeacherTracksStudent) {
  const TrainData d = toy_data(30, 60);
  RunSpec spec = toy_spec();
  spec.method.meanteacher.ema_decay = 0.0;
  Classifier last;
  std::size_t epochs = 0;
  spec.hooks.on_step = [&](const StepRecord&, const Classifier& live) { last = live; };
  spec.hooks.on_epoch = [&](std::size_t, const Classifier& teacher) {
    ++epochs;
    EXPECT_TRUE(teacher == last);
  };
  auto r = train(Method::MeanTeacher, d, spec);
  EXPECT_EQ(epochs, 3u);
  EXPECT_TRUE(r.model == last);

  // identical noise draws on identical models leave nothing to penalize
  Rng a(9), b(9), init(1);
  Classifier m(spec.model, init);
  TokenBatch batch = TokenBatch::from_samples(d.unlabeled);
  auto ct = meanteacher_consistency(m, m, batch, {0.05, true}, 1.0, a, b);
  EXPECT_EQ(ct.loss, 0.0);
}

TEST(MeanTeacher, TeacherMatchesGeometricClosedFormUnderFrozenStudent) {
  Rng rng(4);
  RunSpec spec = toy_spec();
  Classifier student(spec.model, rng), start(spec.model, rng);
  EmaShadow<Classifier> teacher(start, 0.99);
  for (int n = 0; n < 25; ++n) teacher.update(student);
  const double keep = std::pow(0.99, 25);
  auto tp = teacher.model().parameters();
  auto sp = student.parameters();
  auto p0 = start.parameters();
  for (std::size_t i = 0; i < tp.size(); ++i)
    for (std::size_t k = 0; k < tp[i]->size(); ++k)
      EXPECT_NEAR(tp[i]->values()[k], keep * p0[i]->values()[k] + (1 - keep) * sp[i]->values()[k], 1e-12);
}

TEST(NoisyStudent, PseudoLabelingIsNoiseFreeAndLoopBoundaries) {
  const TrainData d = toy_data(30, 50);
  RunSpec spec = toy_spec();
  spec.method.noisystudent = {2, 2, 1};
  std::vector<ForwardFlags> flags;
  std::vector<std::string> phases;
  spec.hooks.on_forward = [&](const ForwardFlags& f) { flags.push_back(f); };
  spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) { phases.push_back(r.phase); };
  auto r = train(Method::NoisyStudent, d, spec);
  ASSERT_EQ(flags.size(), 2u);
  for (const auto& f : flags) {
    EXPECT_EQ(f.purpose, "pseudo_label");
    EXPECT_FALSE(f.train_mode);
    EXPECT_EQ(f.sigma, 0.0);
    EXPECT_FALSE(f.dropout_active);
    EXPECT_EQ(f.rows, 50u);
  }
  // teacher: 2 epochs × 2 batches; each student: 1 epoch over 80 samples = 5 batches
  EXPECT_EQ(r.steps, 4u + 5u + 5u);
  EXPECT_EQ(phases.front(), "teacher");
  EXPECT_EQ(phases.back(), "student2");

  spec.method.noisystudent = {2, 0, 1};
  spec.hooks = {};
  auto plain = train(Method::NoisyStudent, d, spec);
  EXPECT_EQ(plain.steps, 4u);
}

TEST(NoisyStudent, EmptyUnlabeledSetRetrainsOnLabeledOnly) {
  TrainData d = toy_data(30, 0);
  RunSpec spec = toy_spec();
  spec.method.noisystudent = {1, 2, 1};
  std::size_t flags = 0;
  spec.hooks.on_forward = [&](const ForwardFlags&) { ++flags; };
  auto r = train(Method::NoisyStudent, d, spec);
  EXPECT_EQ(flags, 0u);
  EXPECT_EQ(r.steps, 2u + 2u + 2u);
}

TEST(Supervised, ZeroEpochsReturnsInitialModel) {
  const TrainData d = toy_data(20, 0);
  RunSpec spec = toy_spec();
  spec.method.epochs = 0;
  auto r = train(Method::Supervised, d, spec);
  Rng init = make_rng(spec.seed, Stream::Init);
  EXPECT_TRUE(r.model == Classifier(spec.model, init));
  EXPECT_EQ(r.steps, 0u);
}

TEST(Supervised, DuplicatedDataDoublesSteps) {
  TrainData d = toy_data(32, 0);
  RunSpec spec = toy_spec();
  auto once = train(Method::Supervised, d, spec);
  const auto copy = d.labeled;
  d.labeled.insert(d.labeled.end(), copy.begin(), copy.end());
  auto twice = train(Method::Supervised, d, spec);
  EXPECT_EQ(twice.steps, 2 * once.steps);
}

TEST(LabelProp, CapsKAndHandlesFullyLabeledData) {
  const TrainData d = toy_data(30, 20);
  RunSpec spec = toy_spec();
  spec.method.labelprop.supervised_epochs = 1;
  spec.method.labelprop.propagation_epochs = 2;
  std::vector<std::string> warnings;
  spec.hooks.on_warning = [&](const std::string& w) { warnings.push_back(w); };
  auto r = train(Method::LabelProp, d, spec);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("capped to 49"), std::string::npos);
  EXPECT_EQ(r.steps, 2u + 2u * 4u);

  TrainData all_labeled = toy_data(30, 0);
  spec.method.labelprop.k = 5;
  std::vector<double> residuals;
  spec.hooks.on_step = [&](const StepRecord& rec, const Classifier&) {
    for (const auto& [name, v] : rec.info)
      if (name == "propagation_residual") residuals.push_back(v);
  };
  train(Method::LabelProp, all_labeled, spec);
  EXPECT_EQ(residuals.size(), 4u);
  for (double v : residuals) EXPECT_LE(v, 1e-5);
}

TEST(LabelProp, HiddenLayerFeatures) {
  const TrainData d = toy_data(20, 20);
  RunSpec spec = toy_spec();
  spec.method.labelprop = {1, 1, 10, 0.99, 3.0, 2};
  EXPECT_NO_THROW(train(Method::LabelProp, d, spec));
  spec.method.labelprop.feature_layer = 3;
  EXPECT_THROW(train(Method::LabelProp, d, spec), Error);
}

TEST(Sgan, ShapesAndRenormalizedEvaluation) {
  const TrainData d = toy_data(30, 40);
  RunSpec spec = toy_spec();
  spec.method.sgan.epochs = 2;
  std::vector<std::string> names;
  spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) {
    names.clear();
    for (const auto& t : r.terms) names.push_back(t.first);
  };
  auto r = train(Method::Sgan, d, spec);
  EXPECT_EQ(r.model.num_classes(), 5u);
  EXPECT_EQ(names, (std::vector<std::string>{"supervised", "unsupervised", "fake", "generator"}));
  const Matrix p = predict_all(r.model, d.unlabeled);
  EXPECT_EQ(p.cols(), 4u);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double s = 0.0;
    for (double v : p.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  Rng g(1);
  Mlp gen({32, 128, spec.model.embed_dim}, g);
  Matrix z(3, 32, 0.5);
  EXPECT_EQ(gen.forward(z).output.cols(), spec.model.embed_dim);
}

TEST(AllMethods, RunWithFiniteTermsAndAreDeterministic) {
  const TrainData d = toy_data(30, 60);
  for (Method m : kAllMethods) {
    for (AugmentKind k : {AugmentKind::None, AugmentKind::Gaussian, AugmentKind::ManifoldMixup}) {
      RunSpec spec = toy_spec();
      spec.augment.kind = k;
      spec.method.epochs = 2;
      spec.method.sgan.epochs = 2;
      spec.method.noisystudent = {1, 1, 1};
      spec.method.labelprop = {1, 1, 10, 0.99, 3.0, 0};
      std::size_t steps = 0;
      spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) {
        ++steps;
        for (const auto& [name, v] : r.terms) EXPECT_TRUE(std::isfinite(v)) << method_name(m) << " " << name;
      };
      auto a = train(m, d, spec);
      auto b = train(m, d, spec);
      EXPECT_GT(steps, 0u) << method_name(m);
      EXPECT_TRUE(a.model == b.model) << method_name(m);
      EXPECT_EQ(a.model.num_classes(), m == Method::Sgan ? 5u : 4u);
    }
  }
}

TEST(MixMatch, ForcedUnitLambdaStillTrains) {
  // Mixed targets must be distributions; logit_loss rejects rows that do not sum to 1.
  const TrainData d = toy_data(20, 40);
  RunSpec spec = toy_spec();
  spec.method.mixmatch.beta_alpha = 1e-3;  // lambda' ~ 1
  std::vector<double> lambdas;
  spec.hooks.on_step = [&](const StepRecord& r, const Classifier&) { lambdas.push_back(r.info.at(0).second); };
  EXPECT_NO_THROW(train(Method::MixMatch, d, spec));
  for (double l : lambdas) EXPECT_GE(l, 0.5);
  EXPECT_DOUBLE_EQ(spec.method.mixmatch.raw_weight / kNumClasses, 1.0);
}

TEST(MethodConfig, JsonRoundTripAndUnknownKeys) {
  MethodConfig c;
  c.fixmatch.confidence_threshold = 0.8;
  c.freematch.frozen_threshold = 0.5;
  MethodConfig back;
  from_json_checked(to_json(c), back);
  EXPECT_EQ(to_json(back), to_json(c));
  nlohmann::json bad = to_json(c);
  bad["fixmatch"]["tau"] = 0.3;
  try {
    from_json_checked(bad, back);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("fixmatch.tau"), std::string::npos);
  }
  nlohmann::json bad_value = {{"fixmatch", {{"confidence_threshold", 1.5}}}};
  MethodConfig m;
  from_json_checked(bad_value, m);
  EXPECT_THROW(m.validate(), Error);
  EXPECT_EQ(parse_method("labelprop"), Method::LabelProp);
  EXPECT_THROW(parse_method("vgcn"), Error);
}
