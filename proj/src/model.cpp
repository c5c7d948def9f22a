#include "consingan/model.hpp"

#include <cmath>

namespace consingan {

// ---------------------------------------------------------------------------
// ConvBlock
// ---------------------------------------------------------------------------

ConvBlock make_conv_block(int cin, int cout, bool norm, bool act, bool reflect,
                          double w_std, double gamma_init, RngStream& rng) {
    ConvBlock blk;
    blk.has_norm = norm;
    blk.has_act = act;
    blk.reflect = reflect;
    Tensor w({cout, cin, 3, 3});
    for (size_t i = 0; i < w.numel(); ++i)
        w[i] = static_cast<float>(w_std * rng.normal());
    blk.w = ag::Var(std::move(w), true);
    blk.b = ag::Var(Tensor({cout, 1, 1}), true);
    if (norm) {
        blk.gamma = ag::Var(Tensor({cout, 1, 1}, static_cast<float>(gamma_init)), true);
        blk.beta = ag::Var(Tensor({cout, 1, 1}), true);
    }
    return blk;
}

ag::Var ConvBlock::forward(const ag::Var& x) const {
    ag::Var y = reflect ? ag::conv2d_bias(ag::reflect_pad(x, 1), w, b, 0)
                        : ag::conv2d_bias(x, w, b, 1);
    if (has_norm) y = ag::instance_norm(y, gamma, beta);
    if (has_act) y = ag::leaky_relu(y, slope);
    return y;
}

void ConvBlock::collect_params(std::vector<ag::Var>& out) const {
    out.push_back(w);
    out.push_back(b);
    if (has_norm) {
        out.push_back(gamma);
        out.push_back(beta);
    }
}

size_t ConvBlock::param_count() const {
    size_t n = w.value().numel() + b.value().numel();
    if (has_norm) n += gamma.value().numel() + beta.value().numel();
    return n;
}

namespace {

ConvBlock clone_block(const ConvBlock& src) {
    ConvBlock dst;
    dst.has_norm = src.has_norm;
    dst.has_act = src.has_act;
    dst.reflect = src.reflect;
    dst.slope = src.slope;
    dst.w = ag::Var(src.w.value(), true);
    dst.b = ag::Var(src.b.value(), true);
    if (src.has_norm) {
        dst.gamma = ag::Var(src.gamma.value(), true);
        dst.beta = ag::Var(src.beta.value(), true);
    }
    return dst;
}

constexpr double kGenWeightStd = 0.02;

GeneratorStage make_stage(int channels, RngStream& rng) {
    GeneratorStage st;
    st.blocks[0] = make_conv_block(channels, channels, true, true, true, kGenWeightStd, 1.0, rng);
    st.blocks[1] = make_conv_block(channels, channels, true, true, true, kGenWeightStd, 1.0, rng);
    // zero norm gain: the residual branch contributes nothing until trained
    st.blocks[2] = make_conv_block(channels, channels, true, true, true, kGenWeightStd, 0.0, rng);
    return st;
}

}  // namespace

ag::Var GeneratorStage::forward(const ag::Var& x) const {
    return blocks[2].forward(blocks[1].forward(blocks[0].forward(x)));
}

void GeneratorStage::collect_params(std::vector<ag::Var>& out) const {
    for (const auto& blk : blocks) blk.collect_params(out);
}

size_t GeneratorStage::param_count() const {
    size_t n = 0;
    for (const auto& blk : blocks) n += blk.param_count();
    return n;
}

// ---------------------------------------------------------------------------
// GrowingGenerator
// ---------------------------------------------------------------------------

GrowingGenerator::GrowingGenerator(std::vector<std::pair<int, int>> resolutions, int channels,
                                   double noise_amp, RngStream& rng)
    : resolutions_(std::move(resolutions)), channels_(channels), noise_amp_(noise_amp) {
    if (resolutions_.empty()) throw InvalidArgumentError("generator needs a stage schedule");
    if (channels_ < 1) throw InvalidArgumentError("generator channel width must be >= 1");
    stem_ = make_conv_block(3, channels_, true, true, true, kGenWeightStd, 1.0, rng);
    stages_.push_back(make_stage(channels_, rng));
    head_ = make_conv_block(channels_, 3, false, false, true, kGenWeightStd, 1.0, rng);
}

void GrowingGenerator::grow(RngStream& rng) {
    if (stage_count() >= max_stages())
        throw InvalidArgumentError("generator already at the final stage");
    stages_.push_back(make_stage(channels_, rng));
}

std::pair<int, int> GrowingGenerator::scaled_size(size_t n, int in_h, int in_w) const {
    const auto& res0 = resolutions_[0];
    const auto& res = resolutions_[n];
    const int th = static_cast<int>(
        std::llround(static_cast<double>(res.first) * in_h / res0.first));
    const int tw = static_cast<int>(
        std::llround(static_cast<double>(res.second) * in_w / res0.second));
    return {std::max(2, th), std::max(2, tw)};
}

ag::Var GrowingGenerator::forward(const Tensor& input, NoiseMode mode, RngStream* rng) const {
    if (input.ndim() != 3 || input.dim(0) != 3)
        throw InvalidArgumentError("generator input must be {3,H,W}");
    if (input.dim(1) < 4 || input.dim(2) < 4)
        throw InvalidArgumentError("generator input below the 4x4 stem minimum");
    if (mode == NoiseMode::sampled && rng == nullptr)
        throw InvalidArgumentError("sampled noise mode needs an rng");

    const int in_h = input.dim(1), in_w = input.dim(2);
    ag::Var f = stem_.forward(ag::Var(input));
    f = ag::add(stages_[0].forward(f), f);
    for (size_t n = 1; n < stages_.size(); ++n) {
        const auto [th, tw] = scaled_size(n, in_h, in_w);
        f = ag::resize(f, th, tw);
        if (mode == NoiseMode::sampled && noise_amp_ != 0.0) {
            Tensor z({channels_, th, tw});
            for (size_t i = 0; i < z.numel(); ++i)
                z[i] = static_cast<float>(noise_amp_ * rng->normal());
            f = ag::add(f, ag::Var(std::move(z)));
        }
        f = ag::add(stages_[n].forward(f), f);
    }
    return ag::tanh_op(head_.forward(f));
}

size_t GrowingGenerator::param_count() const {
    size_t n = stem_.param_count() + head_.param_count();
    for (const auto& st : stages_) n += st.param_count();
    return n;
}

std::vector<ag::Var> GrowingGenerator::stage_params(int n) const {
    if (n < 0 || n >= stage_count()) throw InvalidArgumentError("stage index out of range");
    std::vector<ag::Var> out;
    if (n == 0) stem_.collect_params(out);
    stages_[static_cast<size_t>(n)].collect_params(out);
    return out;
}

std::vector<ag::Var> GrowingGenerator::head_params() const {
    std::vector<ag::Var> out;
    head_.collect_params(out);
    return out;
}

std::vector<ag::Var> GrowingGenerator::all_params() const {
    std::vector<ag::Var> out;
    stem_.collect_params(out);
    for (const auto& st : stages_) st.collect_params(out);
    head_.collect_params(out);
    return out;
}

std::vector<std::string> GrowingGenerator::component_names() const {
    std::vector<std::string> names{"stem"};
    for (int n = 0; n < stage_count(); ++n) names.push_back("stage" + std::to_string(n));
    names.push_back("head");
    return names;
}

std::vector<ag::Var> GrowingGenerator::component_params(const std::string& name) const {
    std::vector<ag::Var> out;
    if (name == "stem") {
        stem_.collect_params(out);
    } else if (name == "head") {
        head_.collect_params(out);
    } else if (name.rfind("stage", 0) == 0) {
        const int n = std::stoi(name.substr(5));
        if (n < 0 || n >= stage_count())
            throw InvalidArgumentError("unknown generator component " + name);
        stages_[static_cast<size_t>(n)].collect_params(out);
    } else {
        throw InvalidArgumentError("unknown generator component " + name);
    }
    return out;
}

GrowingGenerator GrowingGenerator::clone() const {
    GrowingGenerator g;
    g.resolutions_ = resolutions_;
    g.channels_ = channels_;
    g.noise_amp_ = noise_amp_;
    g.stem_ = clone_block(stem_);
    g.head_ = clone_block(head_);
    g.stages_.reserve(stages_.size());
    for (const auto& st : stages_) {
        GeneratorStage copy;
        for (size_t i = 0; i < st.blocks.size(); ++i) copy.blocks[i] = clone_block(st.blocks[i]);
        g.stages_.push_back(std::move(copy));
    }
    return g;
}

// ---------------------------------------------------------------------------
// PatchCritic
// ---------------------------------------------------------------------------

PatchCritic::PatchCritic(int channels, RngStream& rng) : channels_(channels) {
    if (channels_ < 1) throw InvalidArgumentError("critic channel width must be >= 1");
    auto kaiming = [&](int cin) {
        constexpr double slope = 0.2;
        return std::sqrt(2.0 / ((1.0 + slope * slope) * (cin * 9)));
    };
    blocks_[0] = make_conv_block(3, channels_, false, true, false, kaiming(3), 1.0, rng);
    for (int i = 1; i < 4; ++i)
        blocks_[static_cast<size_t>(i)] =
            make_conv_block(channels_, channels_, false, true, false, kaiming(channels_), 1.0, rng);
    blocks_[4] = make_conv_block(channels_, 1, false, false, false, kaiming(channels_), 1.0, rng);
}

ag::Var PatchCritic::forward(const ag::Var& image) const {
    const auto& shape = image.shape();
    if (shape.size() != 3 || shape[0] != 3)
        throw InvalidArgumentError("critic input must be {3,H,W}");
    if (shape[1] < kReceptiveField || shape[2] < kReceptiveField)
        throw InvalidArgumentError("critic input smaller than the receptive field");
    ag::Var y = image;
    for (const auto& blk : blocks_) y = blk.forward(y);
    return y;
}

ag::Var PatchCritic::forward(const Tensor& image) const { return forward(ag::Var(image)); }

size_t PatchCritic::param_count() const {
    size_t n = 0;
    for (const auto& blk : blocks_) n += blk.param_count();
    return n;
}

std::vector<ag::Var> PatchCritic::params() const {
    std::vector<ag::Var> out;
    for (const auto& blk : blocks_) blk.collect_params(out);
    return out;
}

PatchCritic PatchCritic::clone() const {
    PatchCritic d;
    d.channels_ = channels_;
    for (size_t i = 0; i < blocks_.size(); ++i) d.blocks_[i] = clone_block(blocks_[i]);
    return d;
}

PatchCritic warm_start_critic(const PatchCritic& prev) { return prev.clone(); }

}  // namespace consingan
