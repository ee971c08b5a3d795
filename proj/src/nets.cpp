#include "dibs/nets.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dibs::nets {

using kernels::ConvShape;

template <typename T>
Tensor<T> reparam_sample(const GaussianLatent<T>& lat, const Tensor<T>& eps) {
    check(lat.mean.same_shape(lat.std), "reparam_sample: latent shape mismatch");
    check(eps.same_shape(lat.mean),
          "reparam_sample: eps shape " + eps.shape_str() +
              " does not match latent");
    Tensor<T> z(lat.mean.shape());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = lat.mean[i] + lat.std[i] * eps[i];
    return z;
}

// ---------------------------------------------------------------- dense

template <typename T>
void DenseLayer<T>::init(std::size_t in, std::size_t out, RngStream& rng) {
    W = Tensor<T>({out, in});
    b = Tensor<T>({out});
    gW = Tensor<T>({out, in});
    gb = Tensor<T>({out});
    const double bound = 1.0 / std::sqrt(double(in));
    for (std::size_t i = 0; i < W.size(); ++i)
        W[i] = T(rng.uniform(-bound, bound));
}

template <typename T>
Tensor<T> DenseLayer<T>::forward(const Tensor<T>& x) const {
    check(x.rank() == 2 && x.dim(1) == in_dim(),
          "dense: input shape mismatch, got " +
              x.shape_str());
    const std::size_t B = x.dim(0);
    Tensor<T> y({B, out_dim()});
    kernels::gemm_nt(x.data(), W.data(), y.data(), B, in_dim(), out_dim());
    kernels::add_bias_rows(y.data(), b.data(), B, out_dim());
    return y;
}

template <typename T>
Tensor<T> DenseLayer<T>::backward(const Tensor<T>& x, const Tensor<T>& dy,
                                  bool accumulate) {
    const std::size_t B = x.dim(0);
    if (accumulate) {
        kernels::gemm_tn(dy.data(), x.data(), gW.data(), out_dim(), B, in_dim(),
                         /*accumulate=*/true);
        for (std::size_t o = 0; o < out_dim(); ++o) {
            T s = T(0);
            for (std::size_t r = 0; r < B; ++r) s += dy[r * out_dim() + o];
            gb[o] += s;
        }
    }
    Tensor<T> dx({B, in_dim()});
    kernels::gemm_nn(dy.data(), W.data(), dx.data(), B, out_dim(), in_dim());
    return dx;
}

// ---------------------------------------------------------------- conv

template <typename T>
void Conv2dLayer<T>::init(std::size_t in_channels, std::size_t out_channels,
                          RngStream& rng) {
    in_c = in_channels;
    out_c = out_channels;
    W = Tensor<T>({out_c, in_c * 9});
    b = Tensor<T>({out_c});
    gW = Tensor<T>({out_c, in_c * 9});
    gb = Tensor<T>({out_c});
    const double bound = 1.0 / std::sqrt(double(in_c * 9));
    for (std::size_t i = 0; i < W.size(); ++i)
        W[i] = T(rng.uniform(-bound, bound));
}

template <typename T>
Tensor<T> Conv2dLayer<T>::forward(const Tensor<T>& x, Trace& tr) const {
    check(x.rank() == 4 && x.dim(1) == in_c,
          "conv: input shape mismatch, got " +
              x.shape_str());
    ConvShape s;
    s.batch = x.dim(0);
    s.in_c = in_c;
    s.in_h = x.dim(2);
    s.in_w = x.dim(3);
    s.out_c = out_c;
    tr.shape = s;
    const std::size_t oh = s.out_h(), ow = s.out_w();
    const std::size_t rows = s.batch * oh * ow;
    tr.cols = Tensor<T>({rows, s.patch()});
    kernels::im2col(x.data(), tr.cols.data(), s);

    Tensor<T> ymat({rows, out_c});
    kernels::gemm_nt(tr.cols.data(), W.data(), ymat.data(), rows, s.patch(), out_c);
    Tensor<T> y({s.batch, out_c, oh, ow});
    for (std::size_t bi = 0; bi < s.batch; ++bi)
        for (std::size_t p = 0; p < oh * ow; ++p)
            for (std::size_t oc = 0; oc < out_c; ++oc)
                y[(bi * out_c + oc) * oh * ow + p] =
                    ymat[(bi * oh * ow + p) * out_c + oc] + b[oc];
    return y;
}

template <typename T>
Tensor<T> Conv2dLayer<T>::backward(const Trace& tr, const Tensor<T>& dy,
                                   bool accumulate) {
    const ConvShape& s = tr.shape;
    const std::size_t oh = s.out_h(), ow = s.out_w();
    const std::size_t rows = s.batch * oh * ow;
    Tensor<T> dymat({rows, out_c});
    for (std::size_t bi = 0; bi < s.batch; ++bi)
        for (std::size_t p = 0; p < oh * ow; ++p)
            for (std::size_t oc = 0; oc < out_c; ++oc)
                dymat[(bi * oh * ow + p) * out_c + oc] =
                    dy[(bi * out_c + oc) * oh * ow + p];
    if (accumulate) {
        kernels::gemm_tn(dymat.data(), tr.cols.data(), gW.data(), out_c, rows,
                         s.patch(), /*accumulate=*/true);
        for (std::size_t oc = 0; oc < out_c; ++oc) {
            T acc = T(0);
            for (std::size_t r = 0; r < rows; ++r) acc += dymat[r * out_c + oc];
            gb[oc] += acc;
        }
    }
    Tensor<T> dcols({rows, s.patch()});
    kernels::gemm_nn(dymat.data(), W.data(), dcols.data(), rows, out_c, s.patch());
    Tensor<T> dx({s.batch, s.in_c, s.in_h, s.in_w});
    kernels::col2im(dcols.data(), dx.data(), s);
    return dx;
}

// ---------------------------------------------------------------- dropout

namespace {

template <typename T>
void apply_dropout(Tensor<T>& x, Tensor<T>& mask, const DropoutCtx& ctx) {
    if (!ctx.active()) return;
    mask = Tensor<T>(x.shape());
    const T scale = T(1.0 / (1.0 - ctx.rate));
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = ctx.rng->uniform() < ctx.rate ? T(0) : scale;
        x[i] *= mask[i];
    }
}

template <typename T>
void dropout_backward(Tensor<T>& dx, const Tensor<T>& mask) {
    if (mask.empty()) return;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
}

}  // namespace

// ---------------------------------------------------------------- encoder

template <typename T>
void Encoder<T>::init(const ModelConfig& c, RngStream& rng) {
    cfg = c;
    if (cfg.encoder == EncoderKind::mlp) {
        fc1.init(cfg.input_dim, cfg.hidden, rng);
        fc2.init(cfg.hidden, cfg.d_z, rng);
        return;
    }
    check(cfg.conv_channels.size() == 4, "encoder: expected 4 conv channels");
    convs.resize(4);
    std::size_t ch = cfg.in_c, h = cfg.in_h, w = cfg.in_w;
    for (std::size_t i = 0; i < 4; ++i) {
        convs[i].init(ch, cfg.conv_channels[i], rng);
        ch = cfg.conv_channels[i];
        h /= 2;
        w /= 2;
        check(h >= 1 && w >= 1, "encoder: input too small for 4 pooling stages");
    }
    out.init(ch * h * w, cfg.d_z, rng);
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x, Trace& tr,
                              DropoutCtx dropout) const {
    tr = Trace{};
    tr.x = x;
    if (cfg.encoder == EncoderKind::mlp) {
        tr.h_pre = fc1.forward(x);
        tr.h_post = Tensor<T>(tr.h_pre.shape());
        kernels::relu_forward(tr.h_pre.data(), tr.h_post.data(), tr.h_pre.size());
        apply_dropout(tr.h_post, tr.drop_mask, dropout);
        return fc2.forward(tr.h_post);
    }
    Tensor<T> cur = x;
    tr.conv_tr.resize(4);
    tr.conv_pre.resize(4);
    tr.pool_in.resize(4);
    tr.pool_arg.resize(4);
    for (std::size_t i = 0; i < 4; ++i) {
        tr.conv_pre[i] = convs[i].forward(cur, tr.conv_tr[i]);
        tr.pool_in[i] = Tensor<T>(tr.conv_pre[i].shape());
        kernels::relu_forward(tr.conv_pre[i].data(), tr.pool_in[i].data(),
                              tr.conv_pre[i].size());
        const auto& s = tr.pool_in[i].shape();
        Tensor<T> pooled({s[0], s[1], s[2] / 2, s[3] / 2});
        tr.pool_arg[i] = Tensor<std::uint32_t>(pooled.shape());
        kernels::maxpool2_forward(tr.pool_in[i].data(), pooled.data(),
                                  tr.pool_arg[i].data(), s[0], s[1], s[2], s[3]);
        cur = std::move(pooled);
    }
    tr.flat = cur;
    tr.flat.reshape({cur.dim(0), cur.size() / cur.dim(0)});
    apply_dropout(tr.flat, tr.drop_mask, dropout);
    return out.forward(tr.flat);
}

template <typename T>
void Encoder<T>::backward(Trace& tr, const Tensor<T>& dz, bool accumulate) {
    if (cfg.encoder == EncoderKind::mlp) {
        Tensor<T> dh = fc2.backward(tr.h_post, dz, accumulate);
        dropout_backward(dh, tr.drop_mask);
        Tensor<T> dpre(dh.shape());
        kernels::relu_backward(tr.h_pre.data(), dh.data(), dpre.data(), dh.size());
        fc1.backward(tr.x, dpre, accumulate);
        return;
    }
    Tensor<T> dflat = out.backward(tr.flat, dz, accumulate);
    dropout_backward(dflat, tr.drop_mask);
    Tensor<T> cur = std::move(dflat);
    const auto& last = tr.pool_arg[3].shape();
    cur.reshape({last[0], last[1], last[2], last[3]});
    for (int i = 3; i >= 0; --i) {
        const auto& s = tr.pool_in[i].shape();
        Tensor<T> dpool(s);
        kernels::maxpool2_backward(cur.data(), tr.pool_arg[i].data(),
                                   dpool.data(), s[0], s[1], s[2], s[3]);
        Tensor<T> dpre(s);
        kernels::relu_backward(tr.conv_pre[i].data(), dpool.data(), dpre.data(),
                               dpre.size());
        cur = convs[i].backward(tr.conv_tr[i], dpre, accumulate);
    }
}

// ---------------------------------------------------------------- head

template <typename T>
void Head<T>::init(std::size_t d_z, std::size_t d_h, RngStream& rng) {
    fc.init(d_z, 2 * d_h, rng);
}

template <typename T>
GaussianLatent<T> Head<T>::forward(const Tensor<T>& z, Trace& tr) const {
    tr.z = z;
    tr.raw = fc.forward(z);
    const std::size_t B = z.dim(0), dh = fc.out_dim() / 2;
    GaussianLatent<T> lat;
    lat.mean = Tensor<T>({B, dh});
    lat.std = Tensor<T>({B, dh});
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < dh; ++j) {
            lat.mean(r, j) = tr.raw(r, j);
            const T ls = std::clamp(tr.raw(r, dh + j), T(-kLogStdClamp),
                                    T(kLogStdClamp));
            lat.std(r, j) = std::exp(ls);
        }
    return lat;
}

template <typename T>
Tensor<T> Head<T>::backward(const Trace& tr, const Tensor<T>& dmean,
                            const Tensor<T>& dstd, bool accumulate) {
    const std::size_t B = tr.raw.dim(0), dh = fc.out_dim() / 2;
    Tensor<T> draw({B, 2 * dh});
    for (std::size_t r = 0; r < B; ++r)
        for (std::size_t j = 0; j < dh; ++j) {
            draw(r, j) = dmean(r, j);
            const T raw = tr.raw(r, dh + j);
            const bool pass = raw > T(-kLogStdClamp) && raw < T(kLogStdClamp);
            draw(r, dh + j) = pass ? dstd(r, j) * std::exp(raw) : T(0);
        }
    return fc.backward(tr.z, draw, accumulate);
}

// ---------------------------------------------------------------- decoder

template <typename T>
void Decoder<T>::init(std::size_t d_h, std::size_t hidden,
                      std::size_t num_classes, RngStream& rng) {
    fc1.init(d_h, hidden, rng);
    fc2.init(hidden, num_classes, rng);
}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& z_tilde, Trace& tr,
                              DropoutCtx dropout) const {
    tr.z_tilde = z_tilde;
    tr.h_pre = fc1.forward(z_tilde);
    tr.h_post = Tensor<T>(tr.h_pre.shape());
    kernels::relu_forward(tr.h_pre.data(), tr.h_post.data(), tr.h_pre.size());
    apply_dropout(tr.h_post, tr.drop_mask, dropout);
    tr.log_probs = log_softmax_rows(fc2.forward(tr.h_post));
    return tr.log_probs;
}

template <typename T>
Tensor<T> Decoder<T>::backward(Trace& tr, const Tensor<T>& dlogp,
                               bool accumulate) {
    Tensor<T> dlogits = log_softmax_backward(tr.log_probs, dlogp);
    Tensor<T> dh = fc2.backward(tr.h_post, dlogits, accumulate);
    dropout_backward(dh, tr.drop_mask);
    Tensor<T> dpre(dh.shape());
    kernels::relu_backward(tr.h_pre.data(), dh.data(), dpre.data(), dh.size());
    return fc1.backward(tr.z_tilde, dpre, accumulate);
}

// ----------------------------------------------------------- ensemble model

template <typename T>
void EnsembleModel<T>::init(const ModelConfig& c, RngStream& rng) {
    cfg = c;
    check(cfg.K >= 1, "model: K must be >= 1");
    encoder.init(cfg, rng);
    heads.resize(cfg.K);
    decoders.resize(cfg.K);
    for (std::size_t i = 0; i < cfg.K; ++i) heads[i].init(cfg.d_z, cfg.d_h, rng);
    for (std::size_t i = 0; i < cfg.K; ++i)
        decoders[i].init(cfg.d_h, cfg.hidden, cfg.num_classes, rng);
}

template <typename T>
void EnsembleModel<T>::check_input(const Tensor<T>& x) const {
    if (cfg.encoder == EncoderKind::mlp) {
        check(x.rank() == 2 && x.dim(1) == cfg.input_dim,
              "encode: expected [B," + std::to_string(cfg.input_dim) +
                  "] input, got " + x.shape_str());
    } else {
        check(x.rank() == 4 && x.dim(1) == cfg.in_c && x.dim(2) == cfg.in_h &&
                  x.dim(3) == cfg.in_w,
              "encode: expected [B," + std::to_string(cfg.in_c) + "," +
                  std::to_string(cfg.in_h) + "," + std::to_string(cfg.in_w) +
                  "] input, got " + x.shape_str());
    }
}

template <typename T>
Tensor<T> EnsembleModel<T>::encode(const Tensor<T>& x) const {
    check_input(x);
    typename Encoder<T>::Trace tr;
    return encoder.forward(x, tr);
}

template <typename T>
GaussianLatent<T> EnsembleModel<T>::head_forward(std::size_t i,
                                                 const Tensor<T>& z) const {
    if (i >= heads.size())
        throw std::out_of_range("head_forward: head index " + std::to_string(i) +
                                " out of range (K=" + std::to_string(heads.size()) +
                                ")");
    typename Head<T>::Trace tr;
    return heads[i].forward(z, tr);
}

template <typename T>
Tensor<T> EnsembleModel<T>::decode(std::size_t i, const Tensor<T>& z_tilde) const {
    if (i >= decoders.size())
        throw std::out_of_range("decode: decoder index " + std::to_string(i) +
                                " out of range (K=" +
                                std::to_string(decoders.size()) + ")");
    typename Decoder<T>::Trace tr;
    return decoders[i].forward(z_tilde, tr);
}

template <typename T>
void EnsembleModel<T>::visit_encoder_params(const ParamVisitor& fn) {
    if (cfg.encoder == EncoderKind::mlp) {
        fn("encoder.fc1.W", encoder.fc1.W, encoder.fc1.gW);
        fn("encoder.fc1.b", encoder.fc1.b, encoder.fc1.gb);
        fn("encoder.fc2.W", encoder.fc2.W, encoder.fc2.gW);
        fn("encoder.fc2.b", encoder.fc2.b, encoder.fc2.gb);
        return;
    }
    for (std::size_t i = 0; i < encoder.convs.size(); ++i) {
        const std::string p = "encoder.conv" + std::to_string(i);
        fn(p + ".W", encoder.convs[i].W, encoder.convs[i].gW);
        fn(p + ".b", encoder.convs[i].b, encoder.convs[i].gb);
    }
    fn("encoder.out.W", encoder.out.W, encoder.out.gW);
    fn("encoder.out.b", encoder.out.b, encoder.out.gb);
}

template <typename T>
void EnsembleModel<T>::visit_params(const ParamVisitor& fn) {
    visit_encoder_params(fn);
    for (std::size_t i = 0; i < heads.size(); ++i) {
        const std::string p = "head" + std::to_string(i);
        fn(p + ".fc.W", heads[i].fc.W, heads[i].fc.gW);
        fn(p + ".fc.b", heads[i].fc.b, heads[i].fc.gb);
    }
    for (std::size_t i = 0; i < decoders.size(); ++i) {
        const std::string p = "decoder" + std::to_string(i);
        fn(p + ".fc1.W", decoders[i].fc1.W, decoders[i].fc1.gW);
        fn(p + ".fc1.b", decoders[i].fc1.b, decoders[i].fc1.gb);
        fn(p + ".fc2.W", decoders[i].fc2.W, decoders[i].fc2.gW);
        fn(p + ".fc2.b", decoders[i].fc2.b, decoders[i].fc2.gb);
    }
}

template <typename T>
void EnsembleModel<T>::visit_generator_params(const ParamVisitor& fn) {
    visit_encoder_params(fn);
    for (std::size_t i = 0; i < heads.size(); ++i) {
        const std::string p = "head" + std::to_string(i);
        fn(p + ".fc.W", heads[i].fc.W, heads[i].fc.gW);
        fn(p + ".fc.b", heads[i].fc.b, heads[i].fc.gb);
    }
}

template <typename T>
void EnsembleModel<T>::visit_decoder_params(const ParamVisitor& fn) {
    for (std::size_t i = 0; i < heads.size(); ++i) {
        const std::string p = "head" + std::to_string(i);
        fn(p + ".fc.W", heads[i].fc.W, heads[i].fc.gW);
        fn(p + ".fc.b", heads[i].fc.b, heads[i].fc.gb);
    }
    for (std::size_t i = 0; i < decoders.size(); ++i) {
        const std::string p = "decoder" + std::to_string(i);
        fn(p + ".fc1.W", decoders[i].fc1.W, decoders[i].fc1.gW);
        fn(p + ".fc1.b", decoders[i].fc1.b, decoders[i].fc1.gb);
        fn(p + ".fc2.W", decoders[i].fc2.W, decoders[i].fc2.gW);
        fn(p + ".fc2.b", decoders[i].fc2.b, decoders[i].fc2.gb);
    }
}

template <typename T>
void EnsembleModel<T>::zero_grads() {
    visit_params([](const std::string&, Tensor<T>&, Tensor<T>& g) { g.fill(T(0)); });
}

// ------------------------------------------------------------ discriminator

template <typename T>
void Discriminator<T>::init(std::size_t dh, std::size_t hidden, RngStream& rng) {
    d_h = dh;
    fcs.resize(4);
    fcs[0].init(2 * dh, hidden, rng);
    fcs[1].init(hidden, hidden, rng);
    fcs[2].init(hidden, hidden, rng);
    fcs[3].init(hidden, 1, rng);
}

template <typename T>
Tensor<T> Discriminator<T>::forward_raw(const Tensor<T>& z1, const Tensor<T>& z2,
                                        Trace& tr) const {
    check(z1.same_shape(z2), "discriminate: pair members differ in shape");
    check(z1.rank() == 2 && z1.dim(1) == d_h,
          "discriminate: expected [B," + std::to_string(d_h) + "] samples, got " +
              z1.shape_str());
    const std::size_t B = z1.dim(0);
    tr.input = Tensor<T>({B, 2 * d_h});
    for (std::size_t r = 0; r < B; ++r) {
        std::memcpy(tr.input.data() + r * 2 * d_h, z1.data() + r * d_h,
                    d_h * sizeof(T));
        std::memcpy(tr.input.data() + r * 2 * d_h + d_h, z2.data() + r * d_h,
                    d_h * sizeof(T));
    }
    tr.pre.resize(3);
    tr.post.resize(3);
    const Tensor<T>* cur = &tr.input;
    for (std::size_t i = 0; i < 3; ++i) {
        tr.pre[i] = fcs[i].forward(*cur);
        tr.post[i] = Tensor<T>(tr.pre[i].shape());
        kernels::relu_forward(tr.pre[i].data(), tr.post[i].data(),
                              tr.pre[i].size());
        cur = &tr.post[i];
    }
    tr.logits = fcs[3].forward(*cur);
    tr.prob = Tensor<T>({B});
    for (std::size_t r = 0; r < B; ++r) {
        const T p = T(1) / (T(1) + std::exp(-tr.logits[r]));
        tr.prob[r] = std::clamp(p, T(kProbEps), T(1 - kProbEps));
    }
    return tr.prob;
}

template <typename T>
Tensor<T> Discriminator<T>::backward_raw(Trace& tr, const Tensor<T>& dprob,
                                         bool accumulate) {
    const std::size_t B = tr.prob.dim(0);
    Tensor<T> dlogits({B, 1});
    for (std::size_t r = 0; r < B; ++r) {
        const T p = T(1) / (T(1) + std::exp(-tr.logits[r]));
        const bool pass = p > T(kProbEps) && p < T(1 - kProbEps);
        dlogits[r] = pass ? dprob[r] * p * (T(1) - p) : T(0);
    }
    Tensor<T> d = fcs[3].backward(tr.post[2], dlogits, accumulate);
    for (int i = 2; i >= 0; --i) {
        Tensor<T> dpre(d.shape());
        kernels::relu_backward(tr.pre[i].data(), d.data(), dpre.data(), d.size());
        d = fcs[i].backward(i == 0 ? tr.input : tr.post[i - 1], dpre, accumulate);
    }
    return d;
}

template <typename T>
Tensor<T> Discriminator<T>::discriminate_pair(const Tensor<T>& z1,
                                              const Tensor<T>& z2) const {
    Trace ta, tb;
    Tensor<T> pa = forward_raw(z1, z2, ta);
    Tensor<T> pb = forward_raw(z2, z1, tb);
    Tensor<T> p(pa.shape());
    for (std::size_t i = 0; i < p.size(); ++i)
        p[i] = T(0.5) * (pa[i] + pb[i]);
    return p;
}

template <typename T>
void Discriminator<T>::visit_params(const ParamVisitor& fn) {
    for (std::size_t i = 0; i < fcs.size(); ++i) {
        const std::string p = "disc.fc" + std::to_string(i);
        fn(p + ".W", fcs[i].W, fcs[i].gW);
        fn(p + ".b", fcs[i].b, fcs[i].gb);
    }
}

template <typename T>
void Discriminator<T>::zero_grads() {
    visit_params([](const std::string&, Tensor<T>&, Tensor<T>& g) { g.fill(T(0)); });
}

// --------------------------------------------------------------- softmax

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits) {
    const std::size_t B = logits.dim(0), C = logits.dim(1);
    Tensor<T> out(logits.shape());
    for (std::size_t r = 0; r < B; ++r) {
        const T* row = logits.data() + r * C;
        T m = row[0];
        for (std::size_t j = 1; j < C; ++j) m = std::max(m, row[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < C; ++j) sum += std::exp(row[j] - m);
        const T lse = m + std::log(sum);
        for (std::size_t j = 0; j < C; ++j) out[r * C + j] = row[j] - lse;
    }
    return out;
}

template <typename T>
Tensor<T> log_softmax_backward(const Tensor<T>& log_probs, const Tensor<T>& dlogp) {
    const std::size_t B = log_probs.dim(0), C = log_probs.dim(1);
    Tensor<T> dx(log_probs.shape());
    for (std::size_t r = 0; r < B; ++r) {
        T s = T(0);
        for (std::size_t j = 0; j < C; ++j) s += dlogp[r * C + j];
        for (std::size_t j = 0; j < C; ++j)
            dx[r * C + j] = dlogp[r * C + j] - std::exp(log_probs[r * C + j]) * s;
    }
    return dx;
}

#define DIBS_INSTANTIATE_NETS(T)                                             \
    template Tensor<T> reparam_sample<T>(const GaussianLatent<T>&,           \
                                         const Tensor<T>&);                  \
    template struct DenseLayer<T>;                                           \
    template struct Conv2dLayer<T>;                                          \
    template struct Encoder<T>;                                              \
    template struct Head<T>;                                                 \
    template struct Decoder<T>;                                              \
    template struct EnsembleModel<T>;                                        \
    template struct Discriminator<T>;                                        \
    template Tensor<T> log_softmax_rows<T>(const Tensor<T>&);                \
    template Tensor<T> log_softmax_backward<T>(const Tensor<T>&,             \
                                               const Tensor<T>&);

DIBS_INSTANTIATE_NETS(float)
DIBS_INSTANTIATE_NETS(double)

}  // namespace dibs::nets
