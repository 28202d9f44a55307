#include "relic/objective.hpp"

#include <cmath>
#include <string>

#include "relic/errors.hpp"

namespace relic {

std::vector<std::size_t> sample_negatives(std::size_t batch, std::size_t anchor, std::size_t n,
                                          std::mt19937_64& g) {
  if (anchor >= batch) throw ContractError("sample_negatives: anchor index out of range");
  if (n > batch - 1)
    throw ContractError("sample_negatives: requested " + std::to_string(n) +
                        " negatives from a batch of " + std::to_string(batch));
  std::vector<std::size_t> pool;
  pool.reserve(batch - 1);
  for (std::size_t i = 0; i < batch; ++i)
    if (i != anchor) pool.push_back(i);
  // partial Fisher-Yates: the first n slots end up a uniform sample
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = rindex(g, i, pool.size() - 1);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

CandidateDistribution candidate_distribution(Tape& t, const Tensor& anchor_online,
                                             const Tensor& positive_target,
                                             const Tensor& negative_targets, double tau) {
  if (tau <= 0.0) throw ConfigError("candidate_distribution: tau must be positive");
  const std::size_t d = anchor_online.cols();
  if (anchor_online.rows() != 1 || positive_target.rows() != 1)
    throw DimensionError("candidate_distribution: anchor and positive must be single rows");
  if (positive_target.cols() != d || (negative_targets.size() > 0 && negative_targets.cols() != d))
    throw DimensionError("candidate_distribution: embedding widths disagree");
  const std::size_t n = negative_targets.size() == 0 ? 0 : negative_targets.rows();

  // candidates are always target-side embeddings, hence constants; stack them
  Tensor cands = Tensor::zeros({1 + n, d});
  for (std::size_t j = 0; j < d; ++j) cands.at(0, j) = positive_target.value()[j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) cands.at(1 + i, j) = negative_targets.at(i, j);

  Tensor logits = t.scale(t.matmul_nt(anchor_online, cands), 1.0 / tau);
  CandidateDistribution dist;
  dist.log_probs = t.log_softmax(logits);
  dist.candidate_ids.resize(1 + n);
  for (std::size_t i = 0; i <= n; ++i) dist.candidate_ids[i] = i;
  return dist;
}

namespace {

// KL against already-detached weights: entropy_term - sum(w * log p_graded).
Tensor kl_with_weights(Tape& t, const std::vector<double>& weights, double entropy_term,
                       const CandidateDistribution& graded) {
  if (weights.size() != graded.log_probs.size())
    throw DimensionError("invariance_kl: candidate sets differ in size");
  Tensor w = Tensor::zeros({1, weights.size()});
  std::copy(weights.begin(), weights.end(), w.value().begin());
  Tensor cross = t.sum(t.mul(w, graded.log_probs));
  return t.add_scalar(t.scale(cross, -1.0), entropy_term);
}

void detach_payload(const CandidateDistribution& detached, std::vector<double>& weights,
                    double& entropy_term) {
  weights.resize(detached.log_probs.size());
  entropy_term = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double lp = detached.log_probs.value()[i];
    weights[i] = std::exp(lp);
    entropy_term += weights[i] * lp;
  }
}

}  // namespace

Tensor invariance_kl(Tape& t, const CandidateDistribution& detached,
                     const CandidateDistribution& graded) {
  // the weighting distribution and its log term are plain numbers; only the
  // graded side's log-probs stay on the tape
  std::vector<double> w;
  double entropy_term = 0.0;
  detach_payload(detached, w, entropy_term);
  return kl_with_weights(t, w, entropy_term, graded);
}

Tensor pair_loss(Tape& t, const Tensor& online_a, const Tensor& online_b,
                 const Tensor& target_b, const Tensor& negative_targets,
                 const LossConfig& cfg, PairParts* parts) {
  CandidateDistribution dist_a =
      candidate_distribution(t, online_a, target_b, negative_targets, cfg.tau);
  CandidateDistribution dist_b =
      candidate_distribution(t, online_b, target_b, negative_targets, cfg.tau);
  Tensor log_p_pos = t.gather_cols(dist_a.log_probs, {0});
  std::vector<double> w;
  double entropy_term = 0.0;
  detach_payload(dist_b, w, entropy_term);
  Tensor kl = kl_with_weights(t, w, entropy_term, dist_a);
  if (parts != nullptr) {
    parts->contrastive = -log_p_pos.item();
    parts->invariance = kl.item();
    if (parts->capture_detached) {
      parts->detached_weights = std::move(w);
      parts->detached_entropy = entropy_term;
    }
  }
  return t.add(t.scale(log_p_pos, -cfg.alpha), t.scale(kl, cfg.beta));
}

Tensor pair_loss_frozen(Tape& t, const Tensor& online_a, const Tensor& target_b,
                        const Tensor& negative_targets, const LossConfig& cfg,
                        const std::vector<double>& weights, double entropy_term,
                        PairParts* parts) {
  CandidateDistribution dist_a =
      candidate_distribution(t, online_a, target_b, negative_targets, cfg.tau);
  Tensor log_p_pos = t.gather_cols(dist_a.log_probs, {0});
  Tensor kl = kl_with_weights(t, weights, entropy_term, dist_a);
  if (parts != nullptr) {
    parts->contrastive = -log_p_pos.item();
    parts->invariance = kl.item();
  }
  return t.add(t.scale(log_p_pos, -cfg.alpha), t.scale(kl, cfg.beta));
}

namespace {

Tensor stack_views(const ViewBatch& views, bool small, std::size_t view_idx) {
  const std::size_t batch = views.size();
  const auto& first = small ? views[0].small[view_idx].image : views[0].large[view_idx].image;
  const std::size_t d = first.numel();
  Tensor x = Tensor::zeros({batch, d});
  for (std::size_t b = 0; b < batch; ++b) {
    const Image& img = small ? views[b].small[view_idx].image : views[b].large[view_idx].image;
    if (img.numel() != d)
      throw DimensionError("batch_loss: views of one slot disagree in pixel count");
    for (std::size_t j = 0; j < d; ++j) x.at(b, j) = img.px[j];
  }
  return x;
}

}  // namespace

Tensor batch_loss(Tape& t, const ViewBatch& views, const NetworkPair& net,
                  const LossConfig& cfg, uint64_t step_seed, BatchLossStats* stats,
                  DetachedState* capture, const DetachedState* replay) {
  const std::size_t batch = views.size();
  if (batch < 2) throw ContractError("batch_loss: need at least 2 images to sample negatives");
  const std::size_t L = views[0].large.size();
  const std::size_t S = views[0].small.size();
  if (L == 0) throw ContractError("batch_loss: need at least one large view");
  for (const auto& v : views)
    if (v.large.size() != L || v.small.size() != S)
      throw ContractError("batch_loss: images carry different view counts");
  if (cfg.n_negatives > batch - 1)
    throw ContractError("batch_loss: n_negatives must be below the batch size");

  // one batched forward per view slot
  std::vector<Tensor> online_large(L), online_small(S), target_large(L);
  for (std::size_t v = 0; v < L; ++v) {
    Tensor x = stack_views(views, false, v);
    online_large[v] = embed_online(t, net, x);
    target_large[v] = embed_target(net, x);
  }
  for (std::size_t v = 0; v < S; ++v) online_small[v] = embed_online(t, net, stack_views(views, true, v));

  const double scale = static_cast<double>((L + S) * L);
  if (stats != nullptr) {
    stats->pairs_per_image = (L + S) * L;
    stats->scale = scale;
    stats->contrastive = 0.0;
    stats->invariance = 0.0;
  }

  Tensor total;  // running sum over images and pairs
  double contrastive_sum = 0.0, invariance_sum = 0.0;
  std::size_t global_ordinal = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t pair_ordinal = 0;
    auto add_pair = [&](const Tensor& online_anchor_mat, std::size_t anchor_view, bool anchor_small,
                        std::size_t j) {
      auto g = make_stream(stream_id(step_seed, "neg", b, pair_ordinal));
      std::vector<std::size_t> negs = sample_negatives(batch, b, cfg.n_negatives, g);
      ++pair_ordinal;

      Tensor anchor = t.gather_rows(online_anchor_mat, {b});
      Tensor positive = Tensor::zeros({1, target_large[j].cols()});
      for (std::size_t k = 0; k < positive.size(); ++k)
        positive.value()[k] = target_large[j].at(b, k);
      Tensor neg_mat = Tensor::zeros({negs.size(), target_large[j].cols()});
      for (std::size_t i = 0; i < negs.size(); ++i)
        for (std::size_t k = 0; k < neg_mat.cols(); ++k)
          neg_mat.at(i, k) = target_large[j].at(negs[i], k);

      PairParts parts;
      parts.capture_detached = capture != nullptr;
      Tensor pl;
      if (replay != nullptr) {
        if (global_ordinal >= replay->weights.size())
          throw ContractError("batch_loss: replayed DetachedState has too few pairs");
        pl = pair_loss_frozen(t, anchor, positive, neg_mat, cfg,
                              replay->weights[global_ordinal],
                              replay->entropy_terms[global_ordinal], &parts);
      } else {
        Tensor online_b_row = t.gather_rows(online_large[j], {b});
        pl = pair_loss(t, anchor, online_b_row, positive, neg_mat, cfg, &parts);
        if (capture != nullptr) {
          capture->weights.push_back(std::move(parts.detached_weights));
          capture->entropy_terms.push_back(parts.detached_entropy);
        }
      }
      ++global_ordinal;
      contrastive_sum += parts.contrastive;
      invariance_sum += parts.invariance;
      if (stats != nullptr && stats->record_pairs)
        stats->records.push_back(PairRecord{b, anchor_view, anchor_small, j, negs, parts});
      total = total.defined() ? t.add(total, pl) : pl;
    };

    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j) add_pair(online_large[i], i, false, j);
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = 0; j < L; ++j) add_pair(online_small[i], i, true, j);
  }

  const double norm = 1.0 / (scale * static_cast<double>(batch));
  if (stats != nullptr) {
    stats->contrastive = contrastive_sum * norm;
    stats->invariance = invariance_sum * norm;
  }
  return t.scale(total, norm);
}

}  // namespace relic
