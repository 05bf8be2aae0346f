#pragma once

#include "mapdiff/layers.hpp"
#include "mapdiff/tensor.hpp"

#include <cstdint>
#include <vector>

#include "json.hpp"

namespace mapdiff {

struct DenoiserConfig {
    int base_channels{16};
    std::vector<int> channel_mults{1, 2, 4};
    int time_embed_dim{64};
    int in_channels{2};
    int out_channels{1};
    int norm_groups{4};

    [[nodiscard]] int levels() const { return static_cast<int>(channel_mults.size()); }
    [[nodiscard]] int channels(int level) const { return base_channels * channel_mults[static_cast<std::size_t>(level)]; }
    /// Patch edges must be divisible by this.
    [[nodiscard]] int patch_multiple() const { return 1 << (levels() - 1); }
    void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const DenoiserConfig& c);
[[nodiscard]] DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

inline constexpr std::size_t kMaxDenoiserParams = 1'000'000;

/// Sinusoidal features of t/T; frequencies span 1 .. 1000 rad per unit t/T.
template <typename T>
[[nodiscard]] std::vector<T> timestep_embedding(int t, int steps, int dim);

/// Conditional noise predictor eps(x_t, t | y): a U-shaped 3D conv encoder-decoder over
/// the channel concatenation [x_t, y]. Each resolution block is
/// conv-GN-(+time bias)-SiLU-conv-GN-SiLU plus a 1x1x1 projection of the block input,
/// so intensity level and scale survive the normalization; downsampling is 2x average pooling,
/// upsampling nearest neighbour with skip concatenation. The output conv starts at zero.
template <typename T>
class Denoiser {
public:
    struct BlockParams {
        std::size_t conv1_w, conv1_b, norm1_g, norm1_b, time_w, time_b, conv2_w, conv2_b, norm2_g, norm2_b, skip_w, skip_b;
        int in_channels, out_channels;
    };

    struct BlockCache {
        Tensor<T> input, h1, n1, a1, h2, n2;
        nn::GroupStats s1, s2;
    };

    /// Activations retained by forward() for backward().
    struct Cache {
        std::vector<T> embedding, hidden_pre, hidden, temb, temb_act;
        std::vector<BlockCache> enc, dec;
        std::vector<Dims> enc_dims;
        Tensor<T> head_input;
    };

    Denoiser() = default;
    Denoiser(DenoiserConfig config, std::uint64_t seed);

    [[nodiscard]] const DenoiserConfig& config() const { return config_; }
    [[nodiscard]] ParamStore<T>& params() { return params_; }
    [[nodiscard]] const ParamStore<T>& params() const { return params_; }
    void set_params(ParamStore<T> p);

    [[nodiscard]] Tensor<T> forward(const Tensor<T>& xt, const Tensor<T>& y, int t, int steps,
                                    Cache* cache = nullptr) const;

    /// Accumulates dLoss/dparams into grads given dLoss/doutput.
    void backward(const Cache& cache, const Tensor<T>& dout, ParamStore<T>& grads) const;

private:
    [[nodiscard]] BlockParams add_block(const std::string& prefix, int cin, int cout);
    [[nodiscard]] Tensor<T> block_forward(const BlockParams& b, const Tensor<T>& x, std::span<const T> temb_act,
                                          BlockCache* cache) const;
    [[nodiscard]] Tensor<T> block_backward(const BlockParams& b, const BlockCache& cache, Tensor<T> dout,
                                           std::span<const T> temb_act, std::span<T> dtemb_act,
                                           ParamStore<T>& grads) const;

    DenoiserConfig config_{};
    ParamStore<T> params_;
    std::size_t time1_w_{}, time1_b_{}, time2_w_{}, time2_b_{}, head_w_{}, head_b_{};
    std::vector<BlockParams> enc_, dec_;
};

extern template class Denoiser<float>;
extern template class Denoiser<double>;

}  // namespace mapdiff
