#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dibs/kernels.hpp"
#include "dibs/rng.hpp"
#include "dibs/tensor.hpp"

namespace dibs::nets {

// Per-head conditional distribution over the stochastic latent; std is
// strictly positive by construction (exp of a clamped log-std).
template <typename T>
struct GaussianLatent {
    Tensor<T> mean;  // [B, d_h]
    Tensor<T> std;   // [B, d_h]
};

// z_tilde = mean + std .* eps, elementwise.
template <typename T>
Tensor<T> reparam_sample(const GaussianLatent<T>& lat, const Tensor<T>& eps);

template <typename T>
struct DenseLayer {
    Tensor<T> W, b;    // W is [out, in]
    Tensor<T> gW, gb;

    void init(std::size_t in, std::size_t out, RngStream& rng);
    std::size_t in_dim() const { return W.dim(1); }
    std::size_t out_dim() const { return W.dim(0); }

    Tensor<T> forward(const Tensor<T>& x) const;
    // Returns dx; accumulates gW/gb unless accumulate is false.
    Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy,
                       bool accumulate = true);
};

template <typename T>
struct Conv2dLayer {
    std::size_t in_c = 0, out_c = 0;
    Tensor<T> W, b;  // W is [out_c, in_c*9], 3x3 kernels, pad 1, stride 1
    Tensor<T> gW, gb;

    void init(std::size_t in_channels, std::size_t out_channels, RngStream& rng);

    struct Trace {
        kernels::ConvShape shape;
        Tensor<T> cols;
    };
    Tensor<T> forward(const Tensor<T>& x, Trace& tr) const;
    Tensor<T> backward(const Trace& tr, const Tensor<T>& dy,
                       bool accumulate = true);
};

// Dropout is inverted (mask/keep) so that running without a mask equals the
// expectation; masks are drawn only when ctx.active.
struct DropoutCtx {
    RngStream* rng = nullptr;
    double rate = 0.0;
    bool active() const { return rng != nullptr && rate > 0.0; }
};

enum class EncoderKind { mlp, cnn };

struct ModelConfig {
    EncoderKind encoder = EncoderKind::mlp;
    // mlp: input_dim is the feature count; cnn: channels/height/width.
    std::size_t input_dim = 2;
    std::size_t in_c = 1, in_h = 28, in_w = 28;
    std::vector<std::size_t> conv_channels{8, 16, 32, 32};
    std::size_t hidden = 128;
    std::size_t d_z = 64;
    std::size_t d_h = 32;
    std::size_t num_classes = 2;
    std::size_t K = 2;
    double dropout = 0.0;

    std::size_t flat_input() const {
        return encoder == EncoderKind::mlp ? input_dim : in_c * in_h * in_w;
    }
};

// Shared encoder f: deterministic map from the input batch to Z.
template <typename T>
struct Encoder {
    ModelConfig cfg;
    // mlp path
    DenseLayer<T> fc1, fc2;
    // cnn path: 4 conv blocks (conv -> relu -> maxpool), then a linear map.
    std::vector<Conv2dLayer<T>> convs;
    DenseLayer<T> out;

    struct Trace {
        Tensor<T> x;
        // mlp
        Tensor<T> h_pre, h_post, drop_mask;
        // cnn
        std::vector<typename Conv2dLayer<T>::Trace> conv_tr;
        std::vector<Tensor<T>> conv_pre;   // pre-relu activations
        std::vector<Tensor<T>> pool_in;    // post-relu, pre-pool
        std::vector<Tensor<std::uint32_t>> pool_arg;
        Tensor<T> flat;
    };

    void init(const ModelConfig& c, RngStream& rng);
    Tensor<T> forward(const Tensor<T>& x, Trace& tr, DropoutCtx dropout = {}) const;
    void backward(Trace& tr, const Tensor<T>& dz, bool accumulate = true);
};

// Stochastic head g_i: one linear layer from Z to (mu, log sigma); log sigma
// is clamped to [-6, 6] before exponentiation.
template <typename T>
struct Head {
    DenseLayer<T> fc;

    struct Trace {
        Tensor<T> z;
        Tensor<T> raw;  // [B, 2*d_h]
    };

    void init(std::size_t d_z, std::size_t d_h, RngStream& rng);
    GaussianLatent<T> forward(const Tensor<T>& z, Trace& tr) const;
    // Returns dz for this head's contribution.
    Tensor<T> backward(const Trace& tr, const Tensor<T>& dmean,
                       const Tensor<T>& dstd, bool accumulate = true);
};

// Decoder q(y|z_tilde): two dense layers with a rectifier between, log-softmax
// output.
template <typename T>
struct Decoder {
    DenseLayer<T> fc1, fc2;

    struct Trace {
        Tensor<T> z_tilde;
        Tensor<T> h_pre, h_post, drop_mask;
        Tensor<T> log_probs;
    };

    void init(std::size_t d_h, std::size_t hidden, std::size_t num_classes,
              RngStream& rng);
    Tensor<T> forward(const Tensor<T>& z_tilde, Trace& tr,
                      DropoutCtx dropout = {}) const;
    Tensor<T> backward(Trace& tr, const Tensor<T>& dlogp, bool accumulate = true);
};

template <typename T>
struct EnsembleModel {
    ModelConfig cfg;
    Encoder<T> encoder;
    std::vector<Head<T>> heads;
    std::vector<Decoder<T>> decoders;

    void init(const ModelConfig& c, RngStream& rng);

    // Stateless spec operations (no gradients).
    Tensor<T> encode(const Tensor<T>& x) const;
    GaussianLatent<T> head_forward(std::size_t i, const Tensor<T>& z) const;
    Tensor<T> decode(std::size_t i, const Tensor<T>& z_tilde) const;

    void check_input(const Tensor<T>& x) const;

    // Parameter registry: visits (name, value, grad) in a stable order.
    using ParamVisitor =
        std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>;
    void visit_params(const ParamVisitor& fn);
    void visit_encoder_params(const ParamVisitor& fn);
    void visit_generator_params(const ParamVisitor& fn);  // encoder + heads
    void visit_decoder_params(const ParamVisitor& fn);    // heads + decoders
    void zero_grads();
};

// Pairwise discriminator: a 4-layer MLP on the concatenated pair, squashed to
// (0,1). discriminate_pair averages both orderings, making the output exactly
// order-invariant.
template <typename T>
struct Discriminator {
    std::size_t d_h = 0;
    std::vector<DenseLayer<T>> fcs;  // 4 layers, last maps to 1

    struct Trace {
        Tensor<T> input;                // [B, 2*d_h]
        std::vector<Tensor<T>> pre;     // pre-activations per hidden layer
        std::vector<Tensor<T>> post;
        Tensor<T> logits;               // [B, 1]
        Tensor<T> prob;                 // [B], clamped to (0,1)
    };

    void init(std::size_t dh, std::size_t hidden, RngStream& rng);

    // Raw network on one ordering.
    Tensor<T> forward_raw(const Tensor<T>& z1, const Tensor<T>& z2,
                          Trace& tr) const;
    // dprob -> gradient w.r.t. the concatenated input; parameter grads are
    // accumulated unless accumulate is false.
    Tensor<T> backward_raw(Trace& tr, const Tensor<T>& dprob,
                           bool accumulate = true);

    // 0.5 * [D(z1||z2) + D(z2||z1)]
    Tensor<T> discriminate_pair(const Tensor<T>& z1, const Tensor<T>& z2) const;

    using ParamVisitor =
        std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>;
    void visit_params(const ParamVisitor& fn);
    void zero_grads();
};

// Row-wise log-softmax and its backward.
template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& logits);
template <typename T>
Tensor<T> log_softmax_backward(const Tensor<T>& log_probs, const Tensor<T>& dlogp);

// FNV-1a digest over the raw bytes of every parameter tensor, in visit order.
template <typename T, typename Visitable>
std::uint64_t param_digest(Visitable& v) {
    std::uint64_t h = kFnvOffset;
    v.visit_params([&](const std::string& name, Tensor<T>& p, Tensor<T>&) {
        h = fnv1a64(name, h);
        h = fnv1a64(p.data(), p.size() * sizeof(T), h);
    });
    return h;
}

constexpr double kLogStdClamp = 6.0;
constexpr double kProbEps = 1e-7;

}  // namespace dibs::nets
