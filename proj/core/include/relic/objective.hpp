#pragma once

#include <cstdint>
#include <vector>

#include "relic/augment.hpp"
#include "relic/nn.hpp"
#include "relic/tensor.hpp"

namespace relic {

struct LossConfig {
  double alpha = 1.0;         // contrastive weight
  double beta = 1.0;          // invariance weight
  double tau = 0.1;           // softmax temperature
  std::size_t n_negatives = 10;

  bool operator==(const LossConfig&) const = default;
};

// Softmax over scaled similarities between one anchor embedding and a
// candidate set; candidate 0 is the positive. candidate_ids are positional
// unless the caller supplies batch-level ids.
struct CandidateDistribution {
  Tensor log_probs;  // [1, 1 + n]
  std::vector<std::size_t> candidate_ids;
};

// n distinct indices drawn uniformly from {0..batch-1} \ {anchor}.
std::vector<std::size_t> sample_negatives(std::size_t batch, std::size_t anchor, std::size_t n,
                                          std::mt19937_64& g);

// anchor_online [1, d] (tape), positive_target [1, d], negative_targets
// [n, d] (both constants). log_probs = log_softmax(<anchor, c> / tau).
CandidateDistribution candidate_distribution(Tape& t, const Tensor& anchor_online,
                                             const Tensor& positive_target,
                                             const Tensor& negative_targets, double tau);

// KL(p_detached || p_graded) with the weighting distribution and its log term
// both detached: sum_c sg(p_d(c)) * (sg(log p_d(c)) - log p_g(c)). Gradient
// flows only through the graded side's log-probabilities.
Tensor invariance_kl(Tape& t, const CandidateDistribution& detached,
                     const CandidateDistribution& graded);

struct PairParts {
  double contrastive = 0.0;  // -log p_a(positive)
  double invariance = 0.0;   // KL value
  // set capture_detached before the call to receive the stop-gradient payload
  bool capture_detached = false;
  std::vector<double> detached_weights;
  double detached_entropy = 0.0;
};

// Frozen stop-gradient payloads (candidate weights and their entropy term)
// captured from one loss evaluation, in pair visit order. Replaying them
// turns the loss into the exact function the tape differentiates: the
// detached side held constant. A finite-difference oracle must evaluate that
// function; differencing the raw loss instead would measure derivative flow
// through the detached weights, which stop_gradient severs by definition.
struct DetachedState {
  std::vector<std::vector<double>> weights;
  std::vector<double> entropy_terms;
};

// Combined loss for one ordered view pair (a anchor, b positive):
//   -alpha * log p_a(positive) + beta * invariance_kl(detached = dist_b,
//                                                     graded = dist_a)
// Both distributions share the candidate set {target_b, negatives}; all
// gradient flows through online_a. Over a full batch pass both orderings of
// every view pair appear, so both views receive invariance gradients.
Tensor pair_loss(Tape& t, const Tensor& online_a, const Tensor& online_b,
                 const Tensor& target_b, const Tensor& negative_targets,
                 const LossConfig& cfg, PairParts* parts = nullptr);

// pair_loss with the invariance weights taken from a frozen payload instead
// of a freshly built dist_b.
Tensor pair_loss_frozen(Tape& t, const Tensor& online_a, const Tensor& target_b,
                        const Tensor& negative_targets, const LossConfig& cfg,
                        const std::vector<double>& weights, double entropy_term,
                        PairParts* parts = nullptr);

struct PairRecord {
  std::size_t image;        // batch slot of the anchor
  std::size_t anchor_view;  // index into large views, or small views when small anchor
  bool anchor_is_small;
  std::size_t positive_view;  // index into large views
  std::vector<std::size_t> negatives;
  PairParts parts;
};

struct BatchLossStats {
  std::size_t pairs_per_image = 0;
  double scale = 0.0;  // (L + S) * L
  double contrastive = 0.0;  // same normalization as the loss
  double invariance = 0.0;
  bool record_pairs = false;  // set before the call to collect `records`
  std::vector<PairRecord> records;
};

// Listing-style batch objective. For every image: all ordered (large_i,
// large_j) pairs including i == j, then all (small_i, large_j) pairs. Small
// crops pass only the online network; target embeddings exist only for large
// views. One fresh negative set is drawn per (anchor image, pair ordinal)
// from a stream derived off `step_seed`; negatives for a pair anchored on
// large view j use the other images' target embeddings of that same view j.
// Result = sum over pairs and images / ((L + S) * L * batch).
//
// `capture`, when given, records the stop-gradient payload of every pair;
// `replay` substitutes a previously captured payload so the evaluation is the
// sg-frozen function of the online parameters (see DetachedState).
Tensor batch_loss(Tape& t, const ViewBatch& views, const NetworkPair& net,
                  const LossConfig& cfg, uint64_t step_seed,
                  BatchLossStats* stats = nullptr, DetachedState* capture = nullptr,
                  const DetachedState* replay = nullptr);

}  // namespace relic
