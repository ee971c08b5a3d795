#pragma once

#include <vector>

#include "dibs/nets.hpp"
#include "dibs/rng.hpp"
#include "dibs/tensor.hpp"

namespace dibs::objectives {

enum class KlMode { explicit_kl, adversarial };

// Per-head weights; the default scheme ties them to a single beta with
// alpha_i = 1 - beta. adv_weight scales the adversarial generator loss (and
// the pairwise-difference diversity loss in the abe baseline).
struct LossWeights {
    std::vector<double> alpha;
    std::vector<double> beta;
    double adv_weight = 1.0;

    static LossWeights from_beta(std::size_t K, double beta_value,
                                 double adv_weight = 1.0);
};

// Closed-form KL(N(mu, diag sigma^2) || N(0, I)) per batch row:
// 0.5 * sum_d (mu_d^2 + sigma_d^2 - 1 - 2 ln sigma_d). Always >= 0.
template <typename T>
Tensor<T> kl_gaussian_to_standard(const nets::GaussianLatent<T>& lat);

// Mean over the batch of -log q(y | z_tilde).
template <typename T>
T nll(const Tensor<T>& log_probs, const std::vector<int>& labels);

// Latent prior r(z_tilde) = psi(z_tilde) = N(0, I). Kept as a named type so
// the pair construction does not hard-code the draw.
struct PriorSpec {
    template <typename T>
    Tensor<T> sample(std::size_t n, std::size_t d_h, RngStream& rng) const {
        Tensor<T> out({n, d_h});
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(rng.normal());
        return out;
    }
};

// All random choices behind one step's pair construction: head assignments,
// epsilon draws and prior draws. Realizing the plan against the current
// parameters is deterministic, which is what the gradient checks need.
template <typename T>
struct PairPlan {
    std::size_t batch = 0, d_h = 0, K = 0;
    // prior_prior
    Tensor<T> pp_z1, pp_z2;
    // prior_head: z1 ~ prior, z2 ~ q(z|x_row, head)
    std::vector<std::size_t> ph_row, ph_head;
    Tensor<T> ph_prior, ph_eps;
    // same_head: two independent draws from one head
    std::vector<std::size_t> sh_row, sh_row2, sh_head;
    Tensor<T> sh_eps1, sh_eps2;
    // cross_head: draws from heads i != j
    std::vector<std::size_t> ch_row, ch_row2, ch_i, ch_j;
    Tensor<T> ch_eps1, ch_eps2;
};

// One pair of each source kind per batch row. cross_input breaks the shared
// conditioning input (ablation); enumerate_cross emits every ordered head
// pair per row instead of one uniform draw.
template <typename T>
PairPlan<T> plan_pairs(std::size_t K, std::size_t batch, std::size_t d_h,
                       const PriorSpec& prior, RngStream& rng,
                       bool cross_input = false, bool enumerate_cross = false);

// Realized latent pairs with their source tags, the adversarial game's input.
template <typename T>
struct PairBatch {
    PairPlan<T> plan;
    Tensor<T> pp_z1, pp_z2;
    Tensor<T> ph_z1, ph_z2;
    Tensor<T> sh_z1, sh_z2;
    Tensor<T> ch_z1, ch_z2;
};

template <typename T>
PairBatch<T> build_pairs(const nets::EnsembleModel<T>& model, const Tensor<T>& x,
                         const PairPlan<T>& plan);

// Convenience overload matching the one-call construction.
template <typename T>
PairBatch<T> build_pairs(const nets::EnsembleModel<T>& model, const Tensor<T>& x,
                         const PriorSpec& prior, RngStream& rng);

// Loss cores on per-pair probabilities (paper sign).
template <typename T>
T generator_loss_terms(const Tensor<T>& p_cross, const Tensor<T>& p_prior_head,
                       const Tensor<T>& p_same_head);
template <typename T>
T discriminator_loss_terms(const Tensor<T>& p_prior_prior,
                           const Tensor<T>& p_cross,
                           const Tensor<T>& p_prior_head);

// L_G = E_cross[ln D] + E_prior-head[ln(1-D)] + E_same-head[ln(1-D)],
// minimized over the generators.
template <typename T>
T generator_loss(const nets::Discriminator<T>& d, const PairBatch<T>& pairs);

// L_D = E_prior-prior[ln D] + E_cross[ln D] + E_prior-head[ln(1-D)],
// maximized over the discriminator. Head samples are constants here.
template <typename T>
T discriminator_loss(const nets::Discriminator<T>& d, const PairBatch<T>& pairs);

// Gradient-bearing variants. Each accumulates d(returned value)/d(params)
// into the owning grad slots: generator_loss_grad touches encoder+head grads
// only; discriminator_loss_grad touches discriminator grads only.
template <typename T>
T generator_loss_grad(nets::EnsembleModel<T>& model, nets::Discriminator<T>& disc,
                      const Tensor<T>& x, const PairPlan<T>& plan);
template <typename T>
T discriminator_loss_grad(nets::EnsembleModel<T>& model,
                          nets::Discriminator<T>& disc, const Tensor<T>& x,
                          const PairPlan<T>& plan);

// Negative mean over unordered head pairs of the batch-mean squared distance
// between per-head outputs (the abe-style diversity objective).
template <typename T>
T abe_diversity_loss(const std::vector<Tensor<T>>& per_head_outputs);

struct VibBreakdown {
    std::vector<double> nll_terms;    // raw per-head nll
    std::vector<double> kl_terms;     // raw per-head mean KL (always measured)
    std::vector<double> alpha_terms;  // alpha_i * nll_i
    std::vector<double> beta_terms;   // beta_i * kl_i when explicit, else 0
    double abe_term = 0.0;            // abe_weight * diversity loss, abe mode only
    double total = 0.0;
};

// Empirical multi-head VIB objective in minimization form:
//   total = sum_i alpha_i*nll_i + [explicit] sum_i beta_i*KL_i
// with one epsilon draw per head. In adversarial mode the KL term is dropped
// from the objective (its role is delegated to the prior-head terms of the
// adversarial game) but still reported. abe_weight adds the pairwise
// diversity term on the sampled latents (abe baseline).
template <typename T>
VibBreakdown vib_loss(nets::EnsembleModel<T>& model, const Tensor<T>& x,
                      const std::vector<int>& labels, const LossWeights& w,
                      const std::vector<Tensor<T>>& eps_draws, KlMode mode,
                      bool with_grad, double abe_weight = 0.0,
                      nets::DropoutCtx dropout = {});

}  // namespace dibs::objectives
