#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ssl_lab/graphprop.hpp"
#include "ssl_lab/netcore/mlp.hpp"
#include "ssl_lab/ssl/common.hpp"
#include "ssl_lab/ssl/primitives.hpp"

namespace ssl_lab {

/// A training pool: samples with target distributions and per-sample weights.
struct Pool {
  const std::vector<EncodedSample>* samples = nullptr;
  Matrix targets;
  std::vector<double> weights;

  std::size_t size() const { return samples ? samples->size() : 0; }
};

inline Pool labeled_pool(const Session& s) {
  return {&s.data.labeled, s.labeled_targets, std::vector<double>(s.data.labeled.size(), 1.0)};
}

namespace detail {

/// Extra loss terms for one step; adds to `total` and records into `rec`.
using ExtraTerm = std::function<void(const Classifier& model, std::span<const std::size_t> batch, StepRecord& rec,
                                     Gradients& total)>;

struct EpochLoop {
  std::size_t epochs = 0;
  std::size_t batch_size = 16;
  NoiseSpec noise;
  std::string phase;
  ExtraTerm extra;
  std::function<void(const Classifier&)> after_step;
  std::function<const Classifier&(const Classifier&)> eval_model;  // defaults to the live model
};

inline void run_epochs(Session& s, Classifier& model, AdamW& opt, const Pool& pool, const EpochLoop& loop) {
  for (std::size_t e = 0; e < loop.epochs; ++e) {
    ++s.epoch;
    for (const auto& idx : shuffled_batches(pool.size(), loop.batch_size, s.labeled_rng)) {
      TokenBatch b = TokenBatch::gather(*pool.samples, idx);
      const Matrix t = select_rows(pool.targets, idx);
      std::vector<double> w;
      for (std::size_t i : idx) w.push_back(pool.weights[i]);
      LabeledTerm lab = s.labeled_term(model, b, t, w, loop.noise);
      StepRecord rec;
      rec.phase = loop.phase;
      rec.add("supervised", lab.loss);
      Gradients total = std::move(lab.grads);
      if (loop.extra) loop.extra(model, idx, rec, total);
      apply_step(opt, model, total);
      ++s.step;
      if (loop.after_step) loop.after_step(model);
      s.emit_step(rec, model);
    }
    s.emit_epoch(loop.eval_model ? loop.eval_model(model) : model);
  }
}

inline std::vector<double> masked_weights(const PseudoLabels& pl, double weight) {
  const std::size_t m = pl.count();
  std::vector<double> w(pl.mask.size(), 0.0);
  if (m == 0) return w;
  const double scale = weight * static_cast<double>(pl.mask.size()) / static_cast<double>(m);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = pl.mask[i] ? scale : 0.0;
  return w;
}

struct TwoViews {
  TokenBatch batch;
  ForwardTrace weak;
  ForwardTrace strong;
};

/// Weak view in eval mode (pseudo-label source), strong view in train mode.
inline TwoViews two_views(Session& s, const Classifier& model, const std::vector<std::size_t>& idx, const ViewNoise& vn) {
  TwoViews v;
  v.batch = TokenBatch::gather(s.data.unlabeled, idx);
  v.weak = forward(model, v.batch, {vn.weak, false}, false, s.unlabeled_rng);
  v.strong = forward(model, v.batch, {vn.strong, true}, true, s.unlabeled_rng);
  return v;
}

inline std::size_t unlabeled_batch(const Session& s, std::size_t batch_size) {
  return s.data.unlabeled.empty() ? 0 : batch_size * s.cfg().unlabeled_ratio;
}

/// −log(1 − p_fake) per row with the fake class last, and its logit gradient
/// scaled by `scale`: p − q where q is the softmax over the real classes.
inline double real_loss(const ForwardTrace& t, double scale, Matrix& dlogits) {
  const std::size_t c = t.logits.cols(), fake = c - 1;
  double loss = 0.0;
  for (std::size_t r = 0; r < t.logits.rows(); ++r) {
    auto z = t.logits.row(r);
    const double lse_all = log_sum_exp(z);
    const double lse_real = log_sum_exp(z.first(fake));
    loss += scale * (lse_all - lse_real);
    double s = 0.0;
    for (std::size_t k = 0; k < fake; ++k) s += t.probs(r, k);
    for (std::size_t k = 0; k < fake; ++k) dlogits(r, k) += scale * (t.probs(r, k) - t.probs(r, k) / s);
    dlogits(r, fake) += scale * t.probs(r, fake);
  }
  return loss;
}

/// −log p_fake per row, gradient p − e_fake.
inline double fake_loss(const ForwardTrace& t, double scale, Matrix& dlogits) {
  const std::size_t c = t.logits.cols(), fake = c - 1;
  double loss = 0.0;
  for (std::size_t r = 0; r < t.logits.rows(); ++r) {
    auto z = t.logits.row(r);
    loss += scale * (log_sum_exp(z) - z[fake]);
    for (std::size_t k = 0; k < c; ++k) dlogits(r, k) += scale * (t.probs(r, k) - (k == fake ? 1.0 : 0.0));
  }
  return loss;
}

}  // namespace detail

/// Squared error between student and teacher probabilities; the teacher side
/// is a constant target.
struct ConsistencyTerm {
  double loss = 0.0;
  Gradients grads;
};

inline ConsistencyTerm meanteacher_consistency(const Classifier& student, const Classifier& teacher, const TokenBatch& batch,
                                               const NoiseSpec& noise, double weight, Rng& student_rng, Rng& teacher_rng) {
  ForwardTrace st = forward(student, batch, noise, true, student_rng);
  ForwardTrace tt = forward(teacher, batch, noise, true, teacher_rng);
  const std::vector<double> w(batch.size(), weight);
  auto lg = loss_and_gradients(student, st, tt.probs, w, LossKind::SquaredError);
  return {lg.loss, std::move(lg.grads)};
}

// ---------------------------------------------------------------------------
// Strategies

inline TrainResult train_supervised(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  detail::EpochLoop loop{s.cfg().epochs, s.cfg().batch_size, {vn.weak, true}, "supervised", {}, {}, {}};
  detail::run_epochs(s, model, opt, labeled_pool(s), loop);
  return {std::move(model), s.step, s.epoch};
}

inline TrainResult train_fixmatch(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& fc = s.cfg().fixmatch;
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  CyclicSampler sampler(data.unlabeled.size(), s.unlabeled_rng);
  const std::size_t nu = detail::unlabeled_batch(s, s.cfg().batch_size);
  auto extra = [&](const Classifier& m, std::span<const std::size_t>, StepRecord& rec, Gradients& total) {
    rec.thresholds = {fc.confidence_threshold};
    if (nu == 0) {
      rec.add("unsupervised", 0.0);
      return;
    }
    detail::TwoViews v = detail::two_views(s, m, sampler.next(nu), vn);
    const PseudoLabels pl = pseudo_label(v.weak.probs, fc.confidence_threshold);
    const auto w = detail::masked_weights(pl, fc.unsupervised_weight);
    LogitLoss ul = logit_loss(v.strong.logits, v.strong.probs, one_hot(pl.labels, kNumClasses), w, LossKind::CrossEntropy);
    total += backward(m, v.strong, ul.dlogits);
    rec.add("unsupervised", ul.loss);
    rec.mask_rate = pl.rate();
  };
  detail::EpochLoop loop{s.cfg().epochs, s.cfg().batch_size, {vn.weak, true}, "fixmatch", extra, {}, {}};
  detail::run_epochs(s, model, opt, labeled_pool(s), loop);
  return {std::move(model), s.step, s.epoch};
}

inline TrainResult train_fixmatch_cr(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& cc = s.cfg().cr;
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  Mlp proj({model.feature_dim(), cc.projection_hidden, cc.projection_dim}, s.aux_rng, model.config().leaky_slope);
  auto proj_params = proj.parameters();
  AdamW proj_opt(std::vector<const Matrix*>(proj_params.begin(), proj_params.end()),
                 std::vector<GroupHyper>(proj_params.size(), GroupHyper{cc.projection_lr, 0.0}));
  CyclicSampler sampler(data.unlabeled.size(), s.unlabeled_rng);
  const std::size_t nu = detail::unlabeled_batch(s, s.cfg().batch_size);
  auto extra = [&](const Classifier& m, std::span<const std::size_t>, StepRecord& rec, Gradients& total) {
    rec.thresholds = {cc.unsup_threshold, cc.contrastive_threshold};
    if (nu == 0) {
      rec.add("unsupervised", 0.0);
      rec.add("contrastive", 0.0);
      return;
    }
    detail::TwoViews v = detail::two_views(s, m, sampler.next(nu), vn);
    const PseudoLabels pl = pseudo_label(v.weak.probs, cc.unsup_threshold);
    const auto w = detail::masked_weights(pl, cc.unsupervised_weight);
    LogitLoss ul = logit_loss(v.strong.logits, v.strong.probs, one_hot(pl.labels, kNumClasses), w, LossKind::CrossEntropy);

    const Mlp::Trace pt = proj.forward(v.strong.hidden[0]);
    std::vector<double> norms;
    const Matrix z = l2_normalize_rows(pt.output, &norms);
    ContrastiveTerm ct = contrastive_loss(z, pl.labels, pl.confidence, cc.contrastive_threshold, cc.temperature);
    ct.dz *= cc.contrastive_weight;
    const Mlp::Backward pb = proj.backward(pt, l2_normalize_backward(z, norms, ct.dz));
    total += backward(m, v.strong, ul.dlogits, &pb.input_grad);
    proj_opt.step(proj_params, pb.grads);

    rec.add("unsupervised", ul.loss);
    rec.add("contrastive", cc.contrastive_weight * ct.loss);
    rec.mask_rate = pl.rate();
  };
  detail::EpochLoop loop{s.cfg().epochs, s.cfg().batch_size, {vn.weak, true}, "fixmatch_cr", extra, {}, {}};
  detail::run_epochs(s, model, opt, labeled_pool(s), loop);
  return {std::move(model), s.step, s.epoch};
}

inline TrainResult train_freematch(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& fc = s.cfg().freematch;
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  FreeMatchThresholds state(kNumClasses, fc.threshold_ema);
  if (fc.frozen_threshold) state.freeze(*fc.frozen_threshold);
  CyclicSampler sampler(data.unlabeled.size(), s.unlabeled_rng);
  const std::size_t nu = detail::unlabeled_batch(s, fc.batch_size);
  auto extra = [&](const Classifier& m, std::span<const std::size_t>, StepRecord& rec, Gradients& total) {
    if (nu == 0) {
      rec.thresholds = state.thresholds();
      rec.add("unsupervised", 0.0);
      rec.add("fairness", 0.0);
      return;
    }
    detail::TwoViews v = detail::two_views(s, m, sampler.next(nu), vn);
    state.update(v.weak.probs);
    rec.thresholds = state.thresholds();
    const PseudoLabels pl = pseudo_label(v.weak.probs, rec.thresholds);
    const auto w = detail::masked_weights(pl, fc.unsupervised_weight);
    LogitLoss ul = logit_loss(v.strong.logits, v.strong.probs, one_hot(pl.labels, kNumClasses), w, LossKind::CrossEntropy);
    FairnessTerm fair = fairness_term(v.strong.probs, pl, state.class_mean(), state.label_hist());
    fair.dprobs *= fc.fairness_weight;
    ul.dlogits += softmax_backward(v.strong.probs, fair.dprobs);
    total += backward(m, v.strong, ul.dlogits);
    rec.add("unsupervised", ul.loss);
    rec.add("fairness", fc.fairness_weight * fair.loss);
    rec.mask_rate = pl.rate();
  };
  detail::EpochLoop loop{s.cfg().epochs, fc.batch_size, {vn.weak, true}, "freematch", extra, {}, {}};
  detail::run_epochs(s, model, opt, labeled_pool(s), loop);
  return {std::move(model), s.step, s.epoch};
}

inline TrainResult train_mixmatch(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& mc = s.cfg().mixmatch;
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  CyclicSampler sampler(data.unlabeled.size(), s.unlabeled_rng);
  const std::size_t nu = detail::unlabeled_batch(s, s.cfg().batch_size);
  const double u_weight = mc.raw_weight / static_cast<double>(kNumClasses);
  Rng& rng = s.unlabeled_rng;
  for (std::size_t e = 0; e < s.cfg().epochs; ++e) {
    ++s.epoch;
    for (const auto& idx : shuffled_batches(data.labeled.size(), s.cfg().batch_size, s.labeled_rng)) {
      TokenBatch pool = TokenBatch::gather(data.labeled, idx);
      Matrix targets = select_rows(s.labeled_targets, idx);
      const std::size_t nl = idx.size();
      if (nu > 0) {
        TokenBatch ub = TokenBatch::gather(data.unlabeled, sampler.next(nu));
        Matrix guess(nu, kNumClasses);
        for (std::size_t k = 0; k < mc.n_guesses; ++k) guess += forward(model, ub, {vn.weak, false}, false, rng).probs;
        guess *= 1.0 / static_cast<double>(mc.n_guesses);
        pool = TokenBatch::concat(pool, ub);
        targets = vstack(targets, sharpen_rows(guess, mc.sharpen_t));
      }
      const std::size_t n = pool.size();
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      const double lambda = sample_mixup(mc.beta_alpha, rng);
      const std::size_t layer = s.manifold_mixup() ? uniform_index(rng, model.num_hidden() + 1) : 0;
      ForwardTrace t = forward_mixed(model, pool, pool.select(perm), lambda, layer, {vn.weak, true}, true, rng);
      Matrix mixed(n, kNumClasses);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < kNumClasses; ++c)
          mixed(i, c) = lambda * targets(i, c) + (1.0 - lambda) * targets(perm[i], c);
      std::vector<double> wl(n, 0.0), wu(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        if (i < nl) wl[i] = static_cast<double>(n) / static_cast<double>(nl);
        else wu[i] = u_weight * static_cast<double>(n) / static_cast<double>(n - nl);
      }
      LogitLoss ce = logit_loss(t.logits, t.probs, mixed, wl, LossKind::CrossEntropy);
      LogitLoss se = logit_loss(t.logits, t.probs, mixed, wu, LossKind::SquaredError);
      ce.dlogits += se.dlogits;
      apply_step(opt, model, backward(model, t, ce.dlogits));
      ++s.step;
      StepRecord rec;
      rec.phase = "mixmatch";
      rec.add("supervised", ce.loss);
      rec.add("unsupervised", se.loss);
      rec.note("mix_lambda", lambda);
      s.emit_step(rec, model);
    }
    s.emit_epoch(model);
  }
  return {std::move(model), s.step, s.epoch};
}

inline TrainResult train_meanteacher(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& mt = s.cfg().meanteacher;
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  EmaShadow<Classifier> teacher(model, mt.ema_decay);
  CyclicSampler sampler(data.unlabeled.size(), s.unlabeled_rng);
  const std::size_t nu = detail::unlabeled_batch(s, s.cfg().batch_size);
  const std::size_t total_steps = s.cfg().epochs * batches_per_epoch(data.labeled.size(), s.cfg().batch_size);
  const auto ramp = static_cast<std::size_t>(std::llround(mt.ramp_fraction * static_cast<double>(total_steps)));
  auto extra = [&](const Classifier& m, std::span<const std::size_t> idx, StepRecord& rec, Gradients& total) {
    const double w = consistency_weight(s.step, ramp, mt.consistency_max_weight);
    TokenBatch b = TokenBatch::gather(data.labeled, idx);
    if (nu > 0) b = TokenBatch::concat(b, TokenBatch::gather(data.unlabeled, sampler.next(nu)));
    ConsistencyTerm ct = meanteacher_consistency(m, teacher.model(), b, {vn.weak, true}, w, s.unlabeled_rng, s.unlabeled_rng);
    total += ct.grads;
    rec.add("consistency", ct.loss);
    rec.note("consistency_weight", w);
  };
  detail::EpochLoop loop{s.cfg().epochs, s.cfg().batch_size, {vn.weak, true}, "meanteacher", extra,
                         [&](const Classifier& m) { teacher.update(m); },
                         [&](const Classifier&) -> const Classifier& { return teacher.model(); }};
  detail::run_epochs(s, model, opt, labeled_pool(s), loop);
  return {teacher.model(), s.step, s.epoch};
}

inline TrainResult train_noisystudent(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& nc = s.cfg().noisystudent;
  Classifier teacher = s.init_model();
  const ViewNoise vn = view_noise(teacher, spec.augment);
  {
    AdamW opt = make_optimizer(teacher, s.cfg().optimizer);
    detail::EpochLoop loop{nc.teacher_epochs, s.cfg().batch_size, {0.0, false}, "teacher", {}, {}, {}};
    detail::run_epochs(s, teacher, opt, labeled_pool(s), loop);
  }
  std::vector<EncodedSample> combined = data.labeled;
  combined.insert(combined.end(), data.unlabeled.begin(), data.unlabeled.end());
  for (std::size_t it = 1; it <= nc.iterations; ++it) {
    Matrix targets = s.labeled_targets;
    if (!data.unlabeled.empty()) {
      s.emit_forward({"pseudo_label", false, 0.0, false, data.unlabeled.size()});
      const Matrix probs = predict_all(teacher, data.unlabeled);
      std::vector<std::size_t> pl;
      for (std::size_t r = 0; r < probs.rows(); ++r) pl.push_back(argmax(probs.row(r)));
      targets = vstack(targets, one_hot(pl, kNumClasses));
    }
    Classifier student = s.init_model(kNumClasses, it);
    AdamW opt = make_optimizer(student, s.cfg().optimizer);
    Pool pool{&combined, std::move(targets), std::vector<double>(combined.size(), 1.0)};
    detail::EpochLoop loop{nc.student_epochs, s.cfg().batch_size, {vn.strong, true}, "student" + std::to_string(it), {}, {}, {}};
    detail::run_epochs(s, student, opt, pool, loop);
    teacher = std::move(student);
  }
  return {std::move(teacher), s.step, s.epoch};
}

/// Features used to build the propagation graph: pooled embeddings, or the
/// eval-mode output of hidden layer `layer`.
inline Matrix propagation_features(const Classifier& model, const std::vector<EncodedSample>& samples, std::size_t layer) {
  require(layer <= model.num_hidden(), ErrorKind::Config, "labelprop.feature_layer exceeds the hidden depth");
  const std::size_t width = layer == 0 ? model.feature_dim() : model.config().hidden_dims[layer - 1];
  Matrix out(samples.size(), width);
  Rng unused(0);
  for (std::size_t start = 0; start < samples.size(); start += 512) {
    const std::size_t end = std::min(samples.size(), start + 512);
    TokenBatch b = TokenBatch::from_samples(std::span(samples).subspan(start, end - start));
    const Matrix h = layer == 0 ? pooled_features(model, b) : forward(model, b, NoiseSpec::clean(), false, unused).hidden[layer];
    for (std::size_t r = 0; r < h.rows(); ++r) std::copy(h.row(r).begin(), h.row(r).end(), out.row(start + r).begin());
  }
  return out;
}

inline TrainResult train_labelprop(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& lc = s.cfg().labelprop;
  Classifier model = s.init_model();
  AdamW opt = make_optimizer(model, s.cfg().optimizer);
  const ViewNoise vn = view_noise(model, spec.augment);
  {
    detail::EpochLoop loop{lc.supervised_epochs, s.cfg().batch_size, {vn.weak, true}, "supervised", {}, {}, {}};
    detail::run_epochs(s, model, opt, labeled_pool(s), loop);
  }
  std::vector<EncodedSample> all = data.labeled;
  all.insert(all.end(), data.unlabeled.begin(), data.unlabeled.end());
  std::vector<std::size_t> labels = label_indices(data.labeled);
  labels.resize(all.size(), kNumClasses);
  std::size_t k = lc.k;
  if (lc.propagation_epochs > 0 && k >= all.size()) {
    require(all.size() >= 2, ErrorKind::InvalidArgument, "label propagation needs at least two samples");
    k = all.size() - 1;
    s.warn("labelprop.k=" + std::to_string(lc.k) + " >= N=" + std::to_string(all.size()) + "; capped to " + std::to_string(k));
  }
  for (std::size_t cycle = 0; cycle < lc.propagation_epochs; ++cycle) {
    const FeatureMatrix x = FeatureMatrix::from(propagation_features(model, all, lc.feature_layer));
    const PropagationResult r = label_propagation(x, labels, kNumClasses, k, lc.gamma, lc.alpha);
    Pool pool{&all, one_hot(r.pseudo_labels, kNumClasses), {}};
    for (std::size_t i = 0; i < all.size(); ++i) pool.weights.push_back(r.certainty[i] * r.class_weights[r.pseudo_labels[i]]);
    const double residual = r.solve.residual;
    auto extra = [&](const Classifier&, std::span<const std::size_t>, StepRecord& rec, Gradients&) {
      rec.note("propagation_residual", residual);
    };
    detail::EpochLoop loop{1, s.cfg().batch_size, {vn.weak, true}, "propagation", extra, {}, {}};
    detail::run_epochs(s, model, opt, pool, loop);
  }
  return {std::move(model), s.step, s.epoch};
}

inline TrainResult train_sgan(const TrainData& data, const RunSpec& spec) {
  Session s(data, spec);
  const auto& gc = s.cfg().sgan;
  Classifier disc = s.init_model(kNumClasses + 1);
  OptimizerSettings dset = s.cfg().optimizer;
  dset.head = {gc.learning_rate, gc.weight_decay};
  AdamW dopt = make_optimizer(disc, dset);
  const ViewNoise vn = view_noise(disc, spec.augment);
  Mlp gen({gc.noise_dim, gc.generator_hidden, disc.feature_dim()}, s.generator_rng, disc.config().leaky_slope);
  auto gparams = gen.parameters();
  AdamW gopt(std::vector<const Matrix*>(gparams.begin(), gparams.end()),
             std::vector<GroupHyper>(gparams.size(), GroupHyper{gc.learning_rate, gc.weight_decay}));
  Matrix targets5(data.labeled.size(), kNumClasses + 1);
  for (std::size_t i = 0; i < data.labeled.size(); ++i)
    for (std::size_t c = 0; c < kNumClasses; ++c) targets5(i, c) = s.labeled_targets(i, c);
  const Pool pool{&data.labeled, targets5, std::vector<double>(data.labeled.size(), 1.0)};
  CyclicSampler sampler(data.unlabeled.size(), s.unlabeled_rng);
  const std::size_t nu = detail::unlabeled_batch(s, s.cfg().batch_size);
  std::normal_distribution<double> normal;
  auto noise_batch = [&](std::size_t n) {
    Matrix z(n, gc.noise_dim);
    for (double& v : z.values()) v = normal(s.generator_rng);
    return z;
  };
  for (std::size_t e = 0; e < gc.epochs; ++e) {
    ++s.epoch;
    for (const auto& idx : shuffled_batches(pool.size(), s.cfg().batch_size, s.labeled_rng)) {
      StepRecord rec;
      rec.phase = "sgan";
      TokenBatch lb = TokenBatch::gather(data.labeled, idx);
      const std::vector<double> w(idx.size(), 1.0);
      LabeledTerm lab = s.labeled_term(disc, lb, select_rows(pool.targets, idx), w, {vn.weak, true});
      rec.add("supervised", lab.loss);
      Gradients total = std::move(lab.grads);
      if (nu > 0) {
        ForwardTrace ut = forward(disc, TokenBatch::gather(data.unlabeled, sampler.next(nu)), {vn.weak, true}, true,
                                  s.unlabeled_rng);
        Matrix dl(ut.logits.rows(), ut.logits.cols());
        rec.add("unsupervised", detail::real_loss(ut, 1.0 / static_cast<double>(nu), dl));
        total += backward(disc, ut, dl);
      } else {
        rec.add("unsupervised", 0.0);
      }
      const std::size_t ng = idx.size();
      {
        const Mlp::Trace gt = gen.forward(noise_batch(ng));
        ForwardTrace ft = forward_features(disc, gt.output, {0.0, true}, true, s.unlabeled_rng);
        Matrix dl(ng, kNumClasses + 1);
        rec.add("fake", detail::fake_loss(ft, 1.0 / static_cast<double>(ng), dl));
        Gradients g = backward(disc, ft, dl);
        g.input_grads.clear();
        total += g;
      }
      apply_step(dopt, disc, total);
      {
        const Mlp::Trace gt = gen.forward(noise_batch(ng));
        ForwardTrace ft = forward_features(disc, gt.output, {0.0, true}, true, s.unlabeled_rng);
        Matrix dl(ng, kNumClasses + 1);
        rec.add("generator", detail::real_loss(ft, 1.0 / static_cast<double>(ng), dl));
        const Gradients g = backward(disc, ft, dl);
        const Mlp::Backward gb = gen.backward(gt, g.input_grads.at(0));
        gopt.step(gparams, gb.grads);
      }
      ++s.step;
      s.emit_step(rec, disc);
    }
    s.emit_epoch(disc);
  }
  return {std::move(disc), s.step, s.epoch};
}

inline TrainResult train(Method method, const TrainData& data, const RunSpec& spec) {
  switch (method) {
    case Method::Supervised: return train_supervised(data, spec);
    case Method::FixMatch: return train_fixmatch(data, spec);
    case Method::FixMatchCr: return train_fixmatch_cr(data, spec);
    case Method::FreeMatch: return train_freematch(data, spec);
    case Method::MixMatch: return train_mixmatch(data, spec);
    case Method::MeanTeacher: return train_meanteacher(data, spec);
    case Method::NoisyStudent: return train_noisystudent(data, spec);
    case Method::LabelProp: return train_labelprop(data, spec);
    case Method::Sgan: return train_sgan(data, spec);
  }
  throw Error(ErrorKind::Config, "unknown method");
}

}  // namespace ssl_lab
