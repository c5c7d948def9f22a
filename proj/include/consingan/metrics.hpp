#pragma once

#include <memory>
#include <string>
#include <vector>

#include "consingan/model.hpp"
#include "consingan/tensor.hpp"

namespace consingan {

// Deterministic map from an RGB raster to a spatial feature map whose
// positions are treated as samples of a C-dimensional distribution.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string tag() const = 0;
    virtual int channels() const = 0;
    virtual Tensor extract(const Tensor& rgb) const = 0;  // {3,H,W} -> {C,H',W'}
};

// Fixed-seed random conv stack; lets the metric suite run with no
// downloaded weights.
class RandomConvExtractor : public FeatureExtractor {
public:
    explicit RandomConvExtractor(int channels = 8, uint64_t seed = 7);
    std::string tag() const override { return tag_; }
    int channels() const override { return channels_; }
    Tensor extract(const Tensor& rgb) const override;

private:
    int channels_;
    std::string tag_;
    Tensor w1_, b1_, w2_, b2_;
};

// Conv stack loaded from a "consingan-fx-v1" weights file (e.g. converted
// inception-class first-pool activations).
class ConvStackFileExtractor : public FeatureExtractor {
public:
    explicit ConvStackFileExtractor(const std::string& path);
    std::string tag() const override { return tag_; }
    int channels() const override { return channels_; }
    Tensor extract(const Tensor& rgb) const override;

    static void write_stack(const std::string& path, const std::string& tag,
                            const std::vector<Tensor>& weights, const std::vector<Tensor>& biases,
                            const std::vector<int>& strides);

private:
    struct Layer {
        Tensor w;  // {Co,Ci,K,K}
        Tensor b;  // {Co}
        int stride = 1;
    };
    std::string tag_;
    int channels_ = 0;
    std::vector<Layer> layers_;
};

// Tags: "test" (bundled random-conv extractor), "inception" (weights file
// found via CONSINGAN_FX_DIR), "file:<path>".
std::unique_ptr<FeatureExtractor> make_extractor(const std::string& tag);
std::vector<std::string> extractor_tags();

struct EvalReport {
    double diversity = 0.0;
    double sifid = 0.0;
    int n_samples = 0;
    std::string extractor_tag;
};

// Mean over pixels of the across-sample std of per-pixel intensity
// (channel mean), normalized by the training image's intensity std.
double diversity_score(const std::vector<Tensor>& samples, const Tensor& training_image);

// Frechet distance between per-image feature statistics.
double sifid(const Tensor& real, const Tensor& fake, const FeatureExtractor& fx);

// mu and covariance of fx features over spatial positions (double precision)
void feature_moments(const Tensor& features, std::vector<double>& mu, std::vector<double>& cov);

EvalReport evaluate_model(const GrowingGenerator& g, const Tensor& training_image, int n_samples,
                          const FeatureExtractor& fx, uint64_t seed);

std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);
void save_eval_report(const EvalReport& report, const std::string& path);

}  // namespace consingan
