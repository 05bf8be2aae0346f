#include "mapdiff/denoiser.hpp"

#include "mapdiff/rng.hpp"

#include <cmath>

namespace mapdiff {

void DenoiserConfig::validate() const {
    if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    if (levels() < 2) throw ConfigError("denoiser needs at least two resolution levels");
    if (time_embed_dim < 4 || time_embed_dim % 2 != 0) throw ConfigError("time_embed_dim must be even and >= 4");
    if (in_channels != 2 || out_channels != 1) throw ConfigError("denoiser maps 2 input channels to 1 output");
    if (norm_groups < 1) throw ConfigError("norm_groups must be >= 1");
    for (int l = 0; l < levels(); ++l) {
        if (channel_mults[static_cast<std::size_t>(l)] < 1) throw ConfigError("channel multipliers must be >= 1");
        if (channels(l) % norm_groups != 0) throw ConfigError("channel counts must be divisible by norm_groups");
    }
}

nlohmann::json to_json(const DenoiserConfig& c) {
    return {{"base_channels", c.base_channels}, {"channel_mults", c.channel_mults},
            {"time_embed_dim", c.time_embed_dim}, {"in_channels", c.in_channels},
            {"out_channels", c.out_channels},     {"norm_groups", c.norm_groups}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
    DenoiserConfig c;
    c.base_channels = j.value("base_channels", c.base_channels);
    c.channel_mults = j.value("channel_mults", c.channel_mults);
    c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.norm_groups = j.value("norm_groups", c.norm_groups);
    c.validate();
    return c;
}

template <typename T>
std::vector<T> timestep_embedding(int t, int steps, int dim) {
    const int half = dim / 2;
    const double s = static_cast<double>(t) / static_cast<double>(steps);
    std::vector<T> emb(static_cast<std::size_t>(dim));
    for (int k = 0; k < half; ++k) {
        const double freq = std::exp(std::log(1000.0) * static_cast<double>(k) / static_cast<double>(half - 1));
        emb[static_cast<std::size_t>(k)] = static_cast<T>(std::sin(freq * s));
        emb[static_cast<std::size_t>(half + k)] = static_cast<T>(std::cos(freq * s));
    }
    return emb;
}

template std::vector<float> timestep_embedding<float>(int, int, int);
template std::vector<double> timestep_embedding<double>(int, int, int);

template <typename T>
typename Denoiser<T>::BlockParams Denoiser<T>::add_block(const std::string& prefix, int cin, int cout) {
    const int e = config_.time_embed_dim;
    BlockParams b{};
    b.in_channels = cin;
    b.out_channels = cout;
    b.conv1_w = params_.add(prefix + ".conv1.weight", {cout, cin, 3, 3, 3});
    b.conv1_b = params_.add(prefix + ".conv1.bias", {cout});
    b.norm1_g = params_.add(prefix + ".norm1.gamma", {cout});
    b.norm1_b = params_.add(prefix + ".norm1.beta", {cout});
    b.time_w = params_.add(prefix + ".time.weight", {cout, e});
    b.time_b = params_.add(prefix + ".time.bias", {cout});
    b.conv2_w = params_.add(prefix + ".conv2.weight", {cout, cout, 3, 3, 3});
    b.conv2_b = params_.add(prefix + ".conv2.bias", {cout});
    b.norm2_g = params_.add(prefix + ".norm2.gamma", {cout});
    b.norm2_b = params_.add(prefix + ".norm2.beta", {cout});
    b.skip_w = params_.add(prefix + ".skip.weight", {cout, cin});
    b.skip_b = params_.add(prefix + ".skip.bias", {cout});
    return b;
}

template <typename T>
Denoiser<T>::Denoiser(DenoiserConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    const int e = config_.time_embed_dim;
    time1_w_ = params_.add("time.fc1.weight", {e, e});
    time1_b_ = params_.add("time.fc1.bias", {e});
    time2_w_ = params_.add("time.fc2.weight", {e, e});
    time2_b_ = params_.add("time.fc2.bias", {e});

    const int levels = config_.levels();
    int cin = config_.in_channels;
    for (int l = 0; l < levels; ++l) {
        enc_.push_back(add_block("enc" + std::to_string(l), cin, config_.channels(l)));
        cin = config_.channels(l);
    }
    for (int l = levels - 2; l >= 0; --l) {
        const int up = (l == levels - 2) ? config_.channels(levels - 1) : config_.channels(l + 1);
        dec_.push_back(add_block("dec" + std::to_string(l), up + config_.channels(l), config_.channels(l)));
    }
    head_w_ = params_.add("head.weight", {config_.out_channels, config_.channels(0), 3, 3, 3});
    head_b_ = params_.add("head.bias", {config_.out_channels});

    if (params_.scalar_count() >= kMaxDenoiserParams)
        throw ConfigError("denoiser has " + std::to_string(params_.scalar_count()) +
                          " parameters; the desk-scale budget is < 1e6");

    Rng rng(seed);
    auto init_uniform = [&](std::size_t idx, int fan_in) {
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (T& v : params_[idx].value) v = static_cast<T>(dist(rng));
    };
    auto init_const = [&](std::size_t idx, T value) {
        std::fill(params_[idx].value.begin(), params_[idx].value.end(), value);
    };
    init_uniform(time1_w_, e);
    init_uniform(time2_w_, e);
    for (auto* blocks : {&enc_, &dec_})
        for (const auto& b : *blocks) {
            init_uniform(b.conv1_w, b.in_channels * nn::kTaps);
            init_uniform(b.conv2_w, b.out_channels * nn::kTaps);
            init_uniform(b.time_w, e);
            init_uniform(b.skip_w, b.in_channels);
            init_const(b.norm1_g, T(1));
            init_const(b.norm2_g, T(1));
        }
    // head stays zero: the initial noise prediction is exactly 0.
}

template <typename T>
void Denoiser<T>::set_params(ParamStore<T> p) {
    if (p.size() != params_.size()) throw ConfigError("parameter set does not match the architecture");
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i].name != params_[i].name || p[i].shape != params_[i].shape)
            throw ConfigError("parameter '" + p[i].name + "' does not match the architecture");
    params_ = std::move(p);
}

template <typename T>
Tensor<T> Denoiser<T>::block_forward(const BlockParams& b, const Tensor<T>& x, std::span<const T> temb_act,
                                     BlockCache* cache) const {
    const int groups = config_.norm_groups;
    Tensor<T> h1 = nn::conv3d<T>(x, params_.values(b.conv1_w), params_.values(b.conv1_b), b.out_channels);
    nn::GroupStats s1, s2;
    Tensor<T> n1 = nn::group_norm<T>(h1, params_.values(b.norm1_g), params_.values(b.norm1_b), groups, s1);
    const auto tb = nn::linear<T>(temb_act, params_.values(b.time_w), params_.values(b.time_b), b.out_channels);
    nn::add_channel_bias<T>(n1, tb);
    Tensor<T> a1 = nn::silu(n1);
    Tensor<T> h2 = nn::conv3d<T>(a1, params_.values(b.conv2_w), params_.values(b.conv2_b), b.out_channels);
    Tensor<T> n2 = nn::group_norm<T>(h2, params_.values(b.norm2_g), params_.values(b.norm2_b), groups, s2);
    Tensor<T> out = nn::pointwise_conv<T>(x, params_.values(b.skip_w), params_.values(b.skip_b), b.out_channels);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += nn::silu(n2.data[i]);
    if (cache) {
        cache->input = x;
        cache->h1 = std::move(h1);
        cache->n1 = std::move(n1);
        cache->a1 = std::move(a1);
        cache->h2 = std::move(h2);
        cache->n2 = std::move(n2);
        cache->s1 = std::move(s1);
        cache->s2 = std::move(s2);
    }
    return out;
}

template <typename T>
Tensor<T> Denoiser<T>::forward(const Tensor<T>& xt, const Tensor<T>& y, int t, int steps, Cache* cache) const {
    if (!xt.same_shape(y) || xt.channels + y.channels != config_.in_channels)
        throw ConfigError("x_t and y must be single-channel tensors of equal shape");
    const int mult = config_.patch_multiple();
    for (int a = 0; a < 3; ++a)
        if (xt.spatial[a] % mult != 0 || xt.spatial[a] < mult)
            throw ConfigError("patch edge must be a positive multiple of " + std::to_string(mult));
    if (t < 1 || t > steps) throw ConfigError("timestep outside [1, T]");
    for (const auto* tensor : {&xt, &y})
        for (T v : tensor->data)
            if (!std::isfinite(v)) throw NumericError("non-finite denoiser input");

    const int e = config_.time_embed_dim;
    auto embedding = timestep_embedding<T>(t, steps, e);
    auto hidden_pre = nn::linear<T>(embedding, params_.values(time1_w_), params_.values(time1_b_), e);
    std::vector<T> hidden(hidden_pre.size());
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = nn::silu(hidden_pre[i]);
    auto temb = nn::linear<T>(hidden, params_.values(time2_w_), params_.values(time2_b_), e);
    std::vector<T> temb_act(temb.size());
    for (std::size_t i = 0; i < temb.size(); ++i) temb_act[i] = nn::silu(temb[i]);

    const int levels = config_.levels();
    if (cache) {
        cache->enc.assign(static_cast<std::size_t>(levels), {});
        cache->dec.assign(dec_.size(), {});
        cache->enc_dims.clear();
    }

    std::vector<Tensor<T>> skips;
    Tensor<T> x = nn::concat(xt, y);
    for (int l = 0; l < levels; ++l) {
        if (l > 0) {
            if (cache) cache->enc_dims.push_back(x.spatial);
            x = nn::avg_pool2(x);
        }
        x = block_forward(enc_[static_cast<std::size_t>(l)], x, temb_act,
                          cache ? &cache->enc[static_cast<std::size_t>(l)] : nullptr);
        skips.push_back(x);
    }
    Tensor<T> h = std::move(skips.back());
    for (std::size_t i = 0; i < dec_.size(); ++i) {
        const int l = levels - 2 - static_cast<int>(i);
        Tensor<T> merged = nn::concat(nn::upsample2(h), skips[static_cast<std::size_t>(l)]);
        h = block_forward(dec_[i], merged, temb_act, cache ? &cache->dec[i] : nullptr);
    }
    Tensor<T> out = nn::conv3d<T>(h, params_.values(head_w_), params_.values(head_b_), config_.out_channels);

    if (cache) {
        cache->embedding = std::move(embedding);
        cache->hidden_pre = std::move(hidden_pre);
        cache->hidden = std::move(hidden);
        cache->temb = std::move(temb);
        cache->temb_act = std::move(temb_act);
        cache->head_input = std::move(h);
    }
    return out;
}

template <typename T>
Tensor<T> Denoiser<T>::block_backward(const BlockParams& b, const BlockCache& c, Tensor<T> dout,
                                      std::span<const T> temb_act, std::span<T> dtemb_act,
                                      ParamStore<T>& grads) const {
    const int groups = config_.norm_groups;
    Tensor<T> dskip_in(c.input.channels, c.input.spatial);
    nn::pointwise_conv_backward<T>(c.input, params_.values(b.skip_w), dout, grads.values(b.skip_w),
                                   grads.values(b.skip_b), dskip_in);
    nn::silu_backward(c.n2, dout);
    Tensor<T> dh2 = nn::group_norm_backward<T>(c.h2, params_.values(b.norm2_g), c.s2, groups, dout,
                                               grads.values(b.norm2_g), grads.values(b.norm2_b));
    Tensor<T> da1;
    nn::conv3d_backward<T>(c.a1, params_.values(b.conv2_w), dh2, grads.values(b.conv2_w), grads.values(b.conv2_b), &da1);
    nn::silu_backward(c.n1, da1);

    std::vector<T> dtb(static_cast<std::size_t>(b.out_channels), T(0));
    for (int ch = 0; ch < b.out_channels; ++ch) {
        T acc = T(0);
        for (T v : da1.channel(ch)) acc += v;
        dtb[static_cast<std::size_t>(ch)] = acc;
    }
    const auto dt = nn::linear_backward<T>(temb_act, params_.values(b.time_w), dtb, grads.values(b.time_w),
                                           grads.values(b.time_b));
    for (std::size_t i = 0; i < dt.size(); ++i) dtemb_act[i] += dt[i];

    Tensor<T> dh1 = nn::group_norm_backward<T>(c.h1, params_.values(b.norm1_g), c.s1, groups, da1,
                                               grads.values(b.norm1_g), grads.values(b.norm1_b));
    Tensor<T> dx;
    nn::conv3d_backward<T>(c.input, params_.values(b.conv1_w), dh1, grads.values(b.conv1_w), grads.values(b.conv1_b), &dx);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dskip_in.data[i];
    return dx;
}

template <typename T>
void Denoiser<T>::backward(const Cache& cache, const Tensor<T>& dout, ParamStore<T>& grads) const {
    const int levels = config_.levels();
    std::vector<T> dtemb_act(cache.temb_act.size(), T(0));

    Tensor<T> dh;
    nn::conv3d_backward<T>(cache.head_input, params_.values(head_w_), dout, grads.values(head_w_),
                           grads.values(head_b_), &dh);

    std::vector<Tensor<T>> dskip(static_cast<std::size_t>(levels));
    for (std::size_t i = dec_.size(); i-- > 0;) {
        const int l = levels - 2 - static_cast<int>(i);
        const auto& b = dec_[i];
        Tensor<T> dmerged = block_backward(b, cache.dec[i], std::move(dh), cache.temb_act, dtemb_act, grads);
        const int up_channels = b.in_channels - config_.channels(l);
        dskip[static_cast<std::size_t>(l)] = nn::slice_channels(dmerged, up_channels, config_.channels(l));
        dh = nn::upsample2_backward(nn::slice_channels(dmerged, 0, up_channels));
    }

    for (int l = levels - 1; l >= 0; --l) {
        if (l < levels - 1) {
            const auto& skip = dskip[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < dh.size(); ++i) dh.data[i] += skip.data[i];
        }
        Tensor<T> din = block_backward(enc_[static_cast<std::size_t>(l)], cache.enc[static_cast<std::size_t>(l)],
                                       std::move(dh), cache.temb_act, dtemb_act, grads);
        if (l > 0) dh = nn::avg_pool2_backward(din, cache.enc_dims[static_cast<std::size_t>(l) - 1]);
    }

    std::vector<T> dtemb(dtemb_act.size());
    for (std::size_t i = 0; i < dtemb.size(); ++i) dtemb[i] = dtemb_act[i] * nn::silu_grad(cache.temb[i]);
    auto dhidden = nn::linear_backward<T>(cache.hidden, params_.values(time2_w_), dtemb, grads.values(time2_w_),
                                          grads.values(time2_b_));
    for (std::size_t i = 0; i < dhidden.size(); ++i) dhidden[i] *= nn::silu_grad(cache.hidden_pre[i]);
    (void)nn::linear_backward<T>(cache.embedding, params_.values(time1_w_), dhidden, grads.values(time1_w_),
                                 grads.values(time1_b_));
}

template class Denoiser<float>;
template class Denoiser<double>;

}  // namespace mapdiff
