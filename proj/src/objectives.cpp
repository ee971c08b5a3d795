#include "dibs/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace dibs::objectives {

using nets::Discriminator;
using nets::EnsembleModel;
using nets::GaussianLatent;

LossWeights LossWeights::from_beta(std::size_t K, double beta_value,
                                   double adv_weight) {
    LossWeights w;
    w.alpha.assign(K, 1.0 - beta_value);
    w.beta.assign(K, beta_value);
    w.adv_weight = adv_weight;
    return w;
}

template <typename T>
Tensor<T> kl_gaussian_to_standard(const GaussianLatent<T>& lat) {
    const std::size_t B = lat.mean.dim(0), D = lat.mean.dim(1);
    Tensor<T> out({B});
    for (std::size_t r = 0; r < B; ++r) {
        T acc = T(0);
        for (std::size_t j = 0; j < D; ++j) {
            const T mu = lat.mean(r, j), sd = lat.std(r, j);
            check(sd > T(0), "kl_gaussian_to_standard: non-positive std");
            acc += mu * mu + sd * sd - T(1) - T(2) * std::log(sd);
        }
        out[r] = T(0.5) * acc;
    }
    return out;
}

template <typename T>
T nll(const Tensor<T>& log_probs, const std::vector<int>& labels) {
    const std::size_t B = log_probs.dim(0), C = log_probs.dim(1);
    check(labels.size() == B, "nll: labels/batch size mismatch");
    T acc = T(0);
    for (std::size_t r = 0; r < B; ++r) {
        check(labels[r] >= 0 && std::size_t(labels[r]) < C,
              "nll: label " + std::to_string(labels[r]) + " out of range for " +
                  std::to_string(C) + " classes");
        acc -= log_probs(r, std::size_t(labels[r]));
    }
    return acc / T(B);
}

// ------------------------------------------------------------------- pairs

template <typename T>
PairPlan<T> plan_pairs(std::size_t K, std::size_t batch, std::size_t d_h,
                       const PriorSpec& prior, RngStream& rng, bool cross_input,
                       bool enumerate_cross) {
    check(K >= 2, "plan_pairs: cross_head pairs need K >= 2");
    check(batch >= 1, "plan_pairs: empty batch");
    PairPlan<T> plan;
    plan.batch = batch;
    plan.d_h = d_h;
    plan.K = K;

    plan.pp_z1 = prior.sample<T>(batch, d_h, rng);
    plan.pp_z2 = prior.sample<T>(batch, d_h, rng);

    auto draw_eps = [&](std::size_t n) { return prior.sample<T>(n, d_h, rng); };
    auto row2_for = [&](std::size_t r) {
        return cross_input ? rng.uniform_int(batch) : r;
    };

    plan.ph_row.resize(batch);
    plan.ph_head.resize(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        plan.ph_row[r] = row2_for(r);
        plan.ph_head[r] = rng.uniform_int(K);
    }
    plan.ph_prior = prior.sample<T>(batch, d_h, rng);
    plan.ph_eps = draw_eps(batch);

    plan.sh_row.resize(batch);
    plan.sh_row2.resize(batch);
    plan.sh_head.resize(batch);
    for (std::size_t r = 0; r < batch; ++r) {
        plan.sh_row[r] = r;
        plan.sh_row2[r] = row2_for(r);
        plan.sh_head[r] = rng.uniform_int(K);
    }
    plan.sh_eps1 = draw_eps(batch);
    plan.sh_eps2 = draw_eps(batch);

    if (enumerate_cross) {
        for (std::size_t r = 0; r < batch; ++r)
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = 0; j < K; ++j) {
                    if (i == j) continue;
                    plan.ch_row.push_back(r);
                    plan.ch_row2.push_back(row2_for(r));
                    plan.ch_i.push_back(i);
                    plan.ch_j.push_back(j);
                }
    } else {
        for (std::size_t r = 0; r < batch; ++r) {
            const std::size_t i = rng.uniform_int(K);
            std::size_t j = rng.uniform_int(K - 1);
            if (j >= i) ++j;
            plan.ch_row.push_back(r);
            plan.ch_row2.push_back(row2_for(r));
            plan.ch_i.push_back(i);
            plan.ch_j.push_back(j);
        }
    }
    plan.ch_eps1 = draw_eps(plan.ch_row.size());
    plan.ch_eps2 = draw_eps(plan.ch_row.size());
    return plan;
}

namespace {

// z_tilde for (row, head) entries, given per-head latents over the full batch.
template <typename T>
Tensor<T> realize(const std::vector<GaussianLatent<T>>& lat,
                  const std::vector<std::size_t>& rows,
                  const std::vector<std::size_t>& heads, const Tensor<T>& eps) {
    const std::size_t n = rows.size(), d = eps.dim(1);
    Tensor<T> z({n, d});
    for (std::size_t p = 0; p < n; ++p) {
        const auto& L = lat[heads[p]];
        for (std::size_t j = 0; j < d; ++j)
            z(p, j) = L.mean(rows[p], j) + L.std(rows[p], j) * eps(p, j);
    }
    return z;
}

}  // namespace

template <typename T>
PairBatch<T> build_pairs(const EnsembleModel<T>& model, const Tensor<T>& x,
                         const PairPlan<T>& plan) {
    PairBatch<T> out;
    out.plan = plan;
    Tensor<T> z = model.encode(x);
    std::vector<GaussianLatent<T>> lat(model.cfg.K);
    for (std::size_t k = 0; k < model.cfg.K; ++k) lat[k] = model.head_forward(k, z);

    out.pp_z1 = plan.pp_z1;
    out.pp_z2 = plan.pp_z2;
    out.ph_z1 = plan.ph_prior;
    out.ph_z2 = realize(lat, plan.ph_row, plan.ph_head, plan.ph_eps);
    out.sh_z1 = realize(lat, plan.sh_row, plan.sh_head, plan.sh_eps1);
    out.sh_z2 = realize(lat, plan.sh_row2, plan.sh_head, plan.sh_eps2);
    out.ch_z1 = realize(lat, plan.ch_row, plan.ch_i, plan.ch_eps1);
    out.ch_z2 = realize(lat, plan.ch_row2, plan.ch_j, plan.ch_eps2);
    return out;
}

template <typename T>
PairBatch<T> build_pairs(const EnsembleModel<T>& model, const Tensor<T>& x,
                         const PriorSpec& prior, RngStream& rng) {
    auto plan = plan_pairs<T>(model.cfg.K, x.dim(0), model.cfg.d_h, prior, rng);
    return build_pairs(model, x, plan);
}

// ------------------------------------------------------------------ losses

namespace {

template <typename T>
T mean_log(const Tensor<T>& p) {
    T acc = T(0);
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::log(p[i]);
    return acc / T(p.size());
}

template <typename T>
T mean_log1m(const Tensor<T>& p) {
    T acc = T(0);
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::log(T(1) - p[i]);
    return acc / T(p.size());
}

}  // namespace

template <typename T>
T generator_loss_terms(const Tensor<T>& p_cross, const Tensor<T>& p_prior_head,
                       const Tensor<T>& p_same_head) {
    check(!p_cross.empty(), "generator_loss: missing cross_head pairs");
    check(!p_prior_head.empty(), "generator_loss: missing prior_head pairs");
    check(!p_same_head.empty(), "generator_loss: missing same_head pairs");
    return mean_log(p_cross) + mean_log1m(p_prior_head) + mean_log1m(p_same_head);
}

template <typename T>
T discriminator_loss_terms(const Tensor<T>& p_prior_prior,
                           const Tensor<T>& p_cross,
                           const Tensor<T>& p_prior_head) {
    check(!p_prior_prior.empty(), "discriminator_loss: missing prior_prior pairs");
    check(!p_cross.empty(), "discriminator_loss: missing cross_head pairs");
    check(!p_prior_head.empty(), "discriminator_loss: missing prior_head pairs");
    return mean_log(p_prior_prior) + mean_log(p_cross) + mean_log1m(p_prior_head);
}

template <typename T>
T generator_loss(const Discriminator<T>& d, const PairBatch<T>& pairs) {
    return generator_loss_terms(d.discriminate_pair(pairs.ch_z1, pairs.ch_z2),
                                d.discriminate_pair(pairs.ph_z1, pairs.ph_z2),
                                d.discriminate_pair(pairs.sh_z1, pairs.sh_z2));
}

template <typename T>
T discriminator_loss(const Discriminator<T>& d, const PairBatch<T>& pairs) {
    return discriminator_loss_terms(
        d.discriminate_pair(pairs.pp_z1, pairs.pp_z2),
        d.discriminate_pair(pairs.ch_z1, pairs.ch_z2),
        d.discriminate_pair(pairs.ph_z1, pairs.ph_z2));
}

namespace {

// Symmetrized discriminator evaluation of one pair group with everything the
// backward pass needs.
template <typename T>
struct GroupEval {
    typename Discriminator<T>::Trace tr_a, tr_b;
    Tensor<T> p;  // 0.5*(p_a + p_b)
};

template <typename T>
GroupEval<T> eval_group(const Discriminator<T>& d, const Tensor<T>& z1,
                        const Tensor<T>& z2) {
    GroupEval<T> g;
    Tensor<T> pa = d.forward_raw(z1, z2, g.tr_a);
    Tensor<T> pb = d.forward_raw(z2, z1, g.tr_b);
    g.p = Tensor<T>(pa.shape());
    for (std::size_t i = 0; i < pa.size(); ++i) g.p[i] = T(0.5) * (pa[i] + pb[i]);
    return g;
}

// dvalue/dp for mean-ln / mean-ln(1-p) terms.
template <typename T>
Tensor<T> dmean_log(const Tensor<T>& p) {
    Tensor<T> d(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) d[i] = T(1) / (T(p.size()) * p[i]);
    return d;
}

template <typename T>
Tensor<T> dmean_log1m(const Tensor<T>& p) {
    Tensor<T> d(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i)
        d[i] = T(-1) / (T(p.size()) * (T(1) - p[i]));
    return d;
}

// Backpropagates dp through both orderings; returns gradients w.r.t. z1 and
// z2. accumulate controls whether discriminator parameter grads are written.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> group_backward(Discriminator<T>& d,
                                               GroupEval<T>& g,
                                               const Tensor<T>& dp,
                                               bool accumulate) {
    const std::size_t n = dp.size(), dh = d.d_h;
    Tensor<T> half(dp.shape());
    for (std::size_t i = 0; i < n; ++i) half[i] = T(0.5) * dp[i];
    Tensor<T> din_a = d.backward_raw(g.tr_a, half, accumulate);
    Tensor<T> din_b = d.backward_raw(g.tr_b, half, accumulate);
    Tensor<T> dz1({n, dh}), dz2({n, dh});
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < dh; ++j) {
            dz1(r, j) = din_a(r, j) + din_b(r, dh + j);
            dz2(r, j) = din_a(r, dh + j) + din_b(r, j);
        }
    return {std::move(dz1), std::move(dz2)};
}

// Routes a sample gradient back to the producing head's (mean, std) slots.
template <typename T>
void route_sample_grad(const Tensor<T>& dz, const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& heads,
                       const Tensor<T>& eps, std::vector<Tensor<T>>& dmean,
                       std::vector<Tensor<T>>& dstd) {
    const std::size_t n = rows.size(), d = dz.dim(1);
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t k = heads[p], r = rows[p];
        for (std::size_t j = 0; j < d; ++j) {
            dmean[k](r, j) += dz(p, j);
            dstd[k](r, j) += dz(p, j) * eps(p, j);
        }
    }
}

}  // namespace

template <typename T>
T generator_loss_grad(EnsembleModel<T>& model, Discriminator<T>& disc,
                      const Tensor<T>& x, const PairPlan<T>& plan) {
    model.check_input(x);
    typename nets::Encoder<T>::Trace enc_tr;
    Tensor<T> z = model.encoder.forward(x, enc_tr);
    const std::size_t K = model.cfg.K, B = z.dim(0), dh = model.cfg.d_h;
    std::vector<typename nets::Head<T>::Trace> head_tr(K);
    std::vector<GaussianLatent<T>> lat(K);
    for (std::size_t k = 0; k < K; ++k) lat[k] = model.heads[k].forward(z, head_tr[k]);

    Tensor<T> ph_z2 = realize(lat, plan.ph_row, plan.ph_head, plan.ph_eps);
    Tensor<T> sh_z1 = realize(lat, plan.sh_row, plan.sh_head, plan.sh_eps1);
    Tensor<T> sh_z2 = realize(lat, plan.sh_row2, plan.sh_head, plan.sh_eps2);
    Tensor<T> ch_z1 = realize(lat, plan.ch_row, plan.ch_i, plan.ch_eps1);
    Tensor<T> ch_z2 = realize(lat, plan.ch_row2, plan.ch_j, plan.ch_eps2);

    GroupEval<T> g_ch = eval_group(disc, ch_z1, ch_z2);
    GroupEval<T> g_ph = eval_group(disc, plan.ph_prior, ph_z2);
    GroupEval<T> g_sh = eval_group(disc, sh_z1, sh_z2);
    const T value = generator_loss_terms(g_ch.p, g_ph.p, g_sh.p);

    // The discriminator is a fixed transport here: its parameter grads stay
    // untouched, only input gradients flow back into the generators.
    auto [d_ch1, d_ch2] = group_backward(disc, g_ch, dmean_log(g_ch.p), false);
    auto [d_ph1, d_ph2] = group_backward(disc, g_ph, dmean_log1m(g_ph.p), false);
    auto [d_sh1, d_sh2] = group_backward(disc, g_sh, dmean_log1m(g_sh.p), false);
    (void)d_ph1;  // prior member: no generator parameters behind it

    std::vector<Tensor<T>> dmean(K), dstd(K);
    for (std::size_t k = 0; k < K; ++k) {
        dmean[k] = Tensor<T>({B, dh});
        dstd[k] = Tensor<T>({B, dh});
    }
    route_sample_grad(d_ch1, plan.ch_row, plan.ch_i, plan.ch_eps1, dmean, dstd);
    route_sample_grad(d_ch2, plan.ch_row2, plan.ch_j, plan.ch_eps2, dmean, dstd);
    route_sample_grad(d_ph2, plan.ph_row, plan.ph_head, plan.ph_eps, dmean, dstd);
    route_sample_grad(d_sh1, plan.sh_row, plan.sh_head, plan.sh_eps1, dmean, dstd);
    route_sample_grad(d_sh2, plan.sh_row2, plan.sh_head, plan.sh_eps2, dmean, dstd);

    Tensor<T> dz({B, model.cfg.d_z});
    for (std::size_t k = 0; k < K; ++k) {
        Tensor<T> dzk = model.heads[k].backward(head_tr[k], dmean[k], dstd[k]);
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dzk[i];
    }
    model.encoder.backward(enc_tr, dz);
    return value;
}

template <typename T>
T discriminator_loss_grad(EnsembleModel<T>& model, Discriminator<T>& disc,
                          const Tensor<T>& x, const PairPlan<T>& plan) {
    // Head samples are constants for the discriminator objective.
    PairBatch<T> pairs = build_pairs(model, x, plan);
    GroupEval<T> g_pp = eval_group(disc, pairs.pp_z1, pairs.pp_z2);
    GroupEval<T> g_ch = eval_group(disc, pairs.ch_z1, pairs.ch_z2);
    GroupEval<T> g_ph = eval_group(disc, pairs.ph_z1, pairs.ph_z2);
    const T value = discriminator_loss_terms(g_pp.p, g_ch.p, g_ph.p);
    group_backward(disc, g_pp, dmean_log(g_pp.p), true);
    group_backward(disc, g_ch, dmean_log(g_ch.p), true);
    group_backward(disc, g_ph, dmean_log1m(g_ph.p), true);
    return value;
}

// --------------------------------------------------------------------- abe

template <typename T>
T abe_diversity_loss(const std::vector<Tensor<T>>& per_head_outputs) {
    const std::size_t K = per_head_outputs.size();
    check(K >= 2, "abe_diversity_loss: needs K >= 2");
    const std::size_t B = per_head_outputs[0].dim(0);
    const std::size_t D = per_head_outputs[0].size() / B;
    T acc = T(0);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j, ++pairs) {
            T dist = T(0);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t d = 0; d < D; ++d) {
                    const T diff = per_head_outputs[i][b * D + d] -
                                   per_head_outputs[j][b * D + d];
                    dist += diff * diff;
                }
            acc += dist / T(B);
        }
    return -acc / T(pairs);
}

// --------------------------------------------------------------------- vib

template <typename T>
VibBreakdown vib_loss(EnsembleModel<T>& model, const Tensor<T>& x,
                      const std::vector<int>& labels, const LossWeights& w,
                      const std::vector<Tensor<T>>& eps_draws, KlMode mode,
                      bool with_grad, double abe_weight,
                      nets::DropoutCtx dropout) {
    const std::size_t K = model.cfg.K, B = x.dim(0);
    check(B >= 1, "vib_loss: empty batch");
    check(w.alpha.size() == K && w.beta.size() == K,
          "vib_loss: weights length must equal K");
    check(eps_draws.size() == K, "vib_loss: need one eps draw per head");
    model.check_input(x);

    typename nets::Encoder<T>::Trace enc_tr;
    Tensor<T> z = model.encoder.forward(x, enc_tr, dropout);
    std::vector<typename nets::Head<T>::Trace> head_tr(K);
    std::vector<typename nets::Decoder<T>::Trace> dec_tr(K);
    std::vector<GaussianLatent<T>> lat(K);
    std::vector<Tensor<T>> z_tilde(K);

    VibBreakdown bd;
    bd.nll_terms.resize(K);
    bd.kl_terms.resize(K);
    bd.alpha_terms.resize(K);
    bd.beta_terms.resize(K);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        lat[k] = model.heads[k].forward(z, head_tr[k]);
        z_tilde[k] = nets::reparam_sample(lat[k], eps_draws[k]);
        Tensor<T> logp = model.decoders[k].forward(z_tilde[k], dec_tr[k], dropout);
        bd.nll_terms[k] = double(nll(logp, labels));
        Tensor<T> kl_rows = kl_gaussian_to_standard(lat[k]);
        T kl_mean = T(0);
        for (std::size_t r = 0; r < B; ++r) kl_mean += kl_rows[r];
        bd.kl_terms[k] = double(kl_mean) / double(B);
        bd.alpha_terms[k] = w.alpha[k] * bd.nll_terms[k];
        bd.beta_terms[k] =
            mode == KlMode::explicit_kl ? w.beta[k] * bd.kl_terms[k] : 0.0;
        total += bd.alpha_terms[k] + bd.beta_terms[k];
    }
    if (abe_weight != 0.0) {
        bd.abe_term = abe_weight * double(abe_diversity_loss(z_tilde));
        total += bd.abe_term;
    }
    bd.total = total;
    if (!with_grad) return bd;

    Tensor<T> dz({B, model.cfg.d_z});
    for (std::size_t k = 0; k < K; ++k) {
        // d(alpha_k * nll_k)/dlogp = -alpha_k/B at the true class.
        Tensor<T> dlogp(dec_tr[k].log_probs.shape());
        for (std::size_t r = 0; r < B; ++r)
            dlogp(r, std::size_t(labels[r])) = T(-w.alpha[k] / double(B));
        Tensor<T> dzt = model.decoders[k].backward(dec_tr[k], dlogp);

        if (abe_weight != 0.0) {
            // d(abe)/d z_k[b] = -2/(P*B) * sum_{j!=k} (z_k[b]-z_j[b])
            const double P = double(K * (K - 1)) / 2.0;
            const T scale = T(-2.0 * abe_weight / (P * double(B)));
            for (std::size_t i = 0; i < dzt.size(); ++i) {
                T diff_sum = T(0);
                for (std::size_t j = 0; j < K; ++j)
                    if (j != k) diff_sum += z_tilde[k][i] - z_tilde[j][i];
                dzt[i] += scale * diff_sum;
            }
        }

        Tensor<T> dmean = dzt;
        Tensor<T> dstd(dzt.shape());
        for (std::size_t i = 0; i < dstd.size(); ++i)
            dstd[i] = dzt[i] * eps_draws[k][i];
        if (mode == KlMode::explicit_kl) {
            const T bw = T(w.beta[k] / double(B));
            for (std::size_t r = 0; r < B; ++r)
                for (std::size_t j = 0; j < lat[k].mean.dim(1); ++j) {
                    dmean(r, j) += bw * lat[k].mean(r, j);
                    dstd(r, j) +=
                        bw * (lat[k].std(r, j) - T(1) / lat[k].std(r, j));
                }
        }
        Tensor<T> dzk = model.heads[k].backward(head_tr[k], dmean, dstd);
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dzk[i];
    }
    model.encoder.backward(enc_tr, dz);
    return bd;
}

#define DIBS_INSTANTIATE_OBJECTIVES(T)                                          \
    template Tensor<T> kl_gaussian_to_standard<T>(const GaussianLatent<T>&);    \
    template T nll<T>(const Tensor<T>&, const std::vector<int>&);               \
    template PairPlan<T> plan_pairs<T>(std::size_t, std::size_t, std::size_t,   \
                                       const PriorSpec&, RngStream&, bool,      \
                                       bool);                                    \
    template PairBatch<T> build_pairs<T>(const EnsembleModel<T>&,               \
                                         const Tensor<T>&, const PairPlan<T>&); \
    template PairBatch<T> build_pairs<T>(const EnsembleModel<T>&,               \
                                         const Tensor<T>&, const PriorSpec&,    \
                                         RngStream&);                            \
    template T generator_loss_terms<T>(const Tensor<T>&, const Tensor<T>&,      \
                                       const Tensor<T>&);                        \
    template T discriminator_loss_terms<T>(const Tensor<T>&, const Tensor<T>&,  \
                                           const Tensor<T>&);                    \
    template T generator_loss<T>(const Discriminator<T>&, const PairBatch<T>&); \
    template T discriminator_loss<T>(const Discriminator<T>&,                   \
                                     const PairBatch<T>&);                       \
    template T generator_loss_grad<T>(EnsembleModel<T>&, Discriminator<T>&,     \
                                      const Tensor<T>&, const PairPlan<T>&);     \
    template T discriminator_loss_grad<T>(EnsembleModel<T>&, Discriminator<T>&, \
                                          const Tensor<T>&, const PairPlan<T>&); \
    template T abe_diversity_loss<T>(const std::vector<Tensor<T>>&);            \
    template VibBreakdown vib_loss<T>(EnsembleModel<T>&, const Tensor<T>&,      \
                                      const std::vector<int>&,                   \
                                      const LossWeights&,                        \
                                      const std::vector<Tensor<T>>&, KlMode,     \
                                      bool, double, nets::DropoutCtx);

DIBS_INSTANTIATE_OBJECTIVES(float)
DIBS_INSTANTIATE_OBJECTIVES(double)

}  // namespace dibs::objectives
