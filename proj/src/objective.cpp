#include "condet/objective.hpp"

#include <cmath>

#include "condet/error.hpp"
#include "condet/log.hpp"
#include "condet/random.hpp"

namespace condet {
namespace {

// Forward state of one stream (b documents).
struct Stream {
  std::vector<EncodeCache> enc;
  std::vector<ProjectCache> proj;
  std::vector<double> logits;
  std::vector<double> probs;
  Matrix z;
  Matrix dh;  // accumulated dL/dh, b x d_h

  void encode_all(const std::vector<std::vector<std::uint32_t>>& ids, const ModelParams& params) {
    enc.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) encode(ids[i], params, &enc[i]);
    dh = Matrix(ids.size(), params.dims().hidden);
  }
  void classify_all(const ModelParams& params) {
    logits.resize(enc.size());
    probs.resize(enc.size());
    for (std::size_t i = 0; i < enc.size(); ++i) {
      logits[i] = classifier_logit(enc[i].h, params);
      probs[i] = sigmoid(logits[i]);
    }
  }
  void project_all(const ModelParams& params) {
    proj.resize(enc.size());
    z = Matrix(enc.size(), params.dims().proj);
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const auto out = project(enc[i].h, params, &proj[i]);
      std::copy(out.begin(), out.end(), z.row(i).begin());
    }
  }
  void backward_ce(std::span<const double> dprobs, double weight, const ModelParams& params,
                   Gradients& grads) {
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const double dlogit = weight * dprobs[i] * probs[i] * (1.0 - probs[i]);
      if (dlogit != 0.0) classify_backward(enc[i].h, dlogit, params, grads, dh.row(i));
    }
  }
  void backward_z(const Matrix& dz, double weight, const ModelParams& params, Gradients& grads) {
    std::vector<double> scaled(dz.cols());
    for (std::size_t i = 0; i < enc.size(); ++i) {
      const auto row = dz.row(i);
      for (std::size_t c = 0; c < scaled.size(); ++c) scaled[c] = weight * row[c];
      project_backward(proj[i], scaled, params, grads, dh.row(i));
    }
  }
  void backward_encoder(const ModelParams& params, Gradients& grads) {
    for (std::size_t i = 0; i < enc.size(); ++i) encode_backward(enc[i], dh.row(i), params, grads);
  }
};

void require_finite_component(double value, const char* name) {
  if (!std::isfinite(value)) throw NumericalError(std::string("non-finite ") + name + " loss");
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  Matrix m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

}  // namespace

std::uint64_t view_seed(const BatchTransform& transform, const Document& doc) {
  return mix_seed(document_seed(mix_seed(transform.config.seed, doc.domain), doc.id), transform.epoch);
}

TokenizedBatch tokenize_batch(const PairedBatch& batch, const TokenizerConfig& tokenizer,
                              const BatchTransform& transform) {
  static const Thesaurus kEmpty;
  const Thesaurus& thesaurus = transform.thesaurus ? *transform.thesaurus : kEmpty;
  auto perturbed = [&](const Document& doc) {
    TransformConfig config = transform.config;
    config.seed = view_seed(transform, doc);
    return tokenize(apply_transform(doc.text, thesaurus, config), tokenizer);
  };
  TokenizedBatch out;
  for (const Document* doc : batch.source) {
    if (!doc->label) throw DataError("source document '" + doc->id + "' has no label");
    out.source.push_back(tokenize(doc->text, tokenizer));
    out.source_pert.push_back(perturbed(*doc));
    out.labels.push_back(*doc->label);
  }
  for (const Document* doc : batch.target) {
    out.target.push_back(tokenize(doc->text, tokenizer));
    out.target_pert.push_back(perturbed(*doc));
  }
  return out;
}

ObjectiveResult loss_and_grads(const TokenizedBatch& batch, const ModelParams& params,
                               const LossConfig& config, Ablation ablation) {
  config.validate();
  const std::size_t b = batch.size();
  if (b == 0) throw UsageError("loss_and_grads: empty batch");
  if (batch.source_pert.size() != b || batch.labels.size() != b) {
    throw UsageError("loss_and_grads: inconsistent source stream sizes");
  }
  const auto w = ObjectiveWeights::from(config, ablation);
  bool use_ctr = w.contrastive != 0.0;
  const bool use_ce = w.ce != 0.0;
  const bool use_mmd = w.mmd != 0.0;
  if (use_ctr && b < 2) {
    log::warn("batch of size 1: contrastive terms skipped");
    use_ctr = false;
  }
  const bool need_target = use_ctr || use_mmd;
  if (need_target && (batch.target.size() != b || batch.target_pert.size() != b)) {
    throw UsageError("loss_and_grads: target stream must match the source batch size");
  }

  ObjectiveResult result{{}, Gradients(params.dims())};
  Gradients& grads = result.grads;
  LossBreakdown& loss = result.loss;

  Stream src, src_pert, tgt, tgt_pert;
  src.encode_all(batch.source, params);
  if (use_ce || use_ctr) src_pert.encode_all(batch.source_pert, params);
  if (need_target) tgt.encode_all(batch.target, params);
  if (use_ctr) tgt_pert.encode_all(batch.target_pert, params);

  if (use_ce) {
    src.classify_all(params);
    src_pert.classify_all(params);
    std::vector<double> d1(b), d2(b);
    loss.ce = ce_loss(src.probs, batch.labels, config.prob_epsilon, d1);
    loss.ce_pert = ce_loss(src_pert.probs, batch.labels, config.prob_epsilon, d2);
    require_finite_component(loss.ce, "ce");
    require_finite_component(loss.ce_pert, "ce_pert");
    loss.total += w.ce * (loss.ce + loss.ce_pert);
    src.backward_ce(d1, w.ce, params, grads);
    src_pert.backward_ce(d2, w.ce, params, grads);
  }

  if (use_ctr || use_mmd) {
    src.project_all(params);
    tgt.project_all(params);
  }
  if (use_ctr) {
    src_pert.project_all(params);
    tgt_pert.project_all(params);
    const auto options = contrastive_options(config);
    Matrix da, dp;
    loss.ctr_s = ntxent(src.z, src_pert.z, options, &da, &dp);
    require_finite_component(loss.ctr_s, "ctr_s");
    src.backward_z(da, w.contrastive, params, grads);
    src_pert.backward_z(dp, w.contrastive, params, grads);
    loss.ctr_t = ntxent(tgt.z, tgt_pert.z, options, &da, &dp);
    require_finite_component(loss.ctr_t, "ctr_t");
    tgt.backward_z(da, w.contrastive, params, grads);
    tgt_pert.backward_z(dp, w.contrastive, params, grads);
    loss.total += w.contrastive * (loss.ctr_s + loss.ctr_t);
  }
  if (use_mmd) {
    Matrix ds, dt;
    loss.mmd = mmd(src.z, tgt.z, config.kernel, &ds, &dt);
    require_finite_component(loss.mmd, "mmd");
    src.backward_z(ds, w.mmd, params, grads);
    tgt.backward_z(dt, w.mmd, params, grads);
    loss.total += w.mmd * loss.mmd;
  }
  require_finite_component(loss.total, "total");

  src.backward_encoder(params, grads);
  if (use_ce || use_ctr) src_pert.backward_encoder(params, grads);
  if (need_target) tgt.backward_encoder(params, grads);
  if (use_ctr) tgt_pert.backward_encoder(params, grads);
  return result;
}

ObjectiveResult loss_and_grads(const PairedBatch& batch, const ModelParams& params,
                               const TokenizerConfig& tokenizer, const BatchTransform& transform,
                               const LossConfig& config, Ablation ablation) {
  return loss_and_grads(tokenize_batch(batch, tokenizer, transform), params, config, ablation);
}

BatchEmbeddings embed_batch(const TokenizedBatch& batch, const ModelParams& params) {
  const auto& d = params.dims();
  BatchEmbeddings out;
  auto run = [&](const std::vector<std::vector<std::uint32_t>>& ids, Matrix& z, Matrix* h,
                 std::vector<double>* probs) {
    std::vector<std::vector<double>> zs, hs;
    for (const auto& seq : ids) {
      auto hv = encode(seq, params);
      zs.push_back(project(hv, params));
      if (probs) probs->push_back(classify(hv, params));
      hs.push_back(std::move(hv));
    }
    z = rows_to_matrix(zs, d.proj);
    if (h) *h = rows_to_matrix(hs, d.hidden);
  };
  run(batch.source, out.source, &out.source_h, &out.probs);
  run(batch.source_pert, out.source_pert, &out.source_pert_h, &out.probs_pert);
  run(batch.target, out.target, nullptr, nullptr);
  run(batch.target_pert, out.target_pert, nullptr, nullptr);
  out.labels = batch.labels;
  return out;
}

}  // namespace condet
