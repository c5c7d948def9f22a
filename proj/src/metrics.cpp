#include "consingan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "consingan/rng.hpp"

namespace consingan {

namespace {

// plain strided valid conv + leaky relu; independent of the autograd path
Tensor conv_lrelu(const Tensor& x, const Tensor& w, const Tensor& b, int stride, bool act) {
    const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co = w.dim(0), k = w.dim(2);
    const int oh = (h - k) / stride + 1;
    const int ow = (wd - k) / stride + 1;
    if (oh < 1 || ow < 1) throw InvalidArgumentError("feature extractor input too small");
    Tensor y({co, oh, ow});
    for (int o = 0; o < co; ++o)
        for (int yy = 0; yy < oh; ++yy)
            for (int xx = 0; xx < ow; ++xx) {
                float acc = b[static_cast<size_t>(o)];
                for (int c = 0; c < ci; ++c)
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx)
                            acc += x.at(c, yy * stride + dy, xx * stride + dx) *
                                   w[((static_cast<size_t>(o) * ci + c) * k + dy) * k + dx];
                y.at(o, yy, xx) = act && acc < 0.0f ? 0.2f * acc : acc;
            }
    return y;
}

}  // namespace

// ---------------------------------------------------------------------------
// extractors
// ---------------------------------------------------------------------------

RandomConvExtractor::RandomConvExtractor(int channels, uint64_t seed)
    : channels_(channels), tag_("test-randomconv-c" + std::to_string(channels)) {
    if (channels_ < 1) throw InvalidArgumentError("extractor channels must be >= 1");
    RngStream rng(seed, 0x5eedf00du);
    const int mid = std::max(4, channels_ / 2);
    auto init = [&rng](Tensor& t, double std) {
        for (size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(std * rng.normal());
    };
    w1_ = Tensor({mid, 3, 3, 3});
    b1_ = Tensor({mid});
    w2_ = Tensor({channels_, mid, 3, 3});
    b2_ = Tensor({channels_});
    init(w1_, std::sqrt(2.0 / (3 * 9)));
    init(w2_, std::sqrt(2.0 / (mid * 9)));
}

Tensor RandomConvExtractor::extract(const Tensor& rgb) const {
    Tensor h = conv_lrelu(rgb, w1_, b1_, 2, true);
    return conv_lrelu(h, w2_, b2_, 2, false);
}

ConvStackFileExtractor::ConvStackFileExtractor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open extractor weights " + path);
    char magic[12] = {};
    in.read(magic, 12);
    if (std::strncmp(magic, "consinganfx1", 12) != 0)
        throw IncompatibilityError("not a consingan-fx-v1 weights file: " + path);
    uint32_t tag_len = 0, n_layers = 0;
    in.read(reinterpret_cast<char*>(&tag_len), 4);
    if (!in || tag_len > 256) throw CorruptionError("bad extractor header: " + path);
    tag_.resize(tag_len);
    in.read(tag_.data(), tag_len);
    in.read(reinterpret_cast<char*>(&n_layers), 4);
    if (!in || n_layers == 0 || n_layers > 64)
        throw CorruptionError("bad extractor layer count: " + path);
    for (uint32_t li = 0; li < n_layers; ++li) {
        uint32_t dims[4] = {};
        uint32_t stride = 0;
        in.read(reinterpret_cast<char*>(dims), 16);
        in.read(reinterpret_cast<char*>(&stride), 4);
        if (!in || stride < 1) throw CorruptionError("bad extractor layer header: " + path);
        Layer layer;
        layer.w = Tensor({static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                          static_cast<int>(dims[2]), static_cast<int>(dims[3])});
        layer.b = Tensor({static_cast<int>(dims[0])});
        layer.stride = static_cast<int>(stride);
        in.read(reinterpret_cast<char*>(layer.w.data()),
                static_cast<std::streamsize>(layer.w.numel() * sizeof(float)));
        in.read(reinterpret_cast<char*>(layer.b.data()),
                static_cast<std::streamsize>(layer.b.numel() * sizeof(float)));
        if (!in) throw CorruptionError("truncated extractor weights: " + path);
        layers_.push_back(std::move(layer));
    }
    channels_ = layers_.back().w.dim(0);
}

Tensor ConvStackFileExtractor::extract(const Tensor& rgb) const {
    Tensor h = rgb;
    for (size_t i = 0; i < layers_.size(); ++i)
        h = conv_lrelu(h, layers_[i].w, layers_[i].b, layers_[i].stride,
                       i + 1 < layers_.size());
    return h;
}

void ConvStackFileExtractor::write_stack(const std::string& path, const std::string& tag,
                                         const std::vector<Tensor>& weights,
                                         const std::vector<Tensor>& biases,
                                         const std::vector<int>& strides) {
    if (weights.size() != biases.size() || weights.size() != strides.size() || weights.empty())
        throw InvalidArgumentError("write_stack: mismatched layer lists");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write("consinganfx1", 12);
    const uint32_t tag_len = static_cast<uint32_t>(tag.size());
    out.write(reinterpret_cast<const char*>(&tag_len), 4);
    out.write(tag.data(), tag_len);
    const uint32_t n_layers = static_cast<uint32_t>(weights.size());
    out.write(reinterpret_cast<const char*>(&n_layers), 4);
    for (size_t i = 0; i < weights.size(); ++i) {
        uint32_t dims[4];
        for (int d = 0; d < 4; ++d) dims[d] = static_cast<uint32_t>(weights[i].dim(d));
        const uint32_t stride = static_cast<uint32_t>(strides[i]);
        out.write(reinterpret_cast<const char*>(dims), 16);
        out.write(reinterpret_cast<const char*>(&stride), 4);
        out.write(reinterpret_cast<const char*>(weights[i].data()),
                  static_cast<std::streamsize>(weights[i].numel() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(biases[i].data()),
                  static_cast<std::streamsize>(biases[i].numel() * sizeof(float)));
    }
}

std::vector<std::string> extractor_tags() { return {"test", "inception", "file:<path>"}; }

std::unique_ptr<FeatureExtractor> make_extractor(const std::string& tag) {
    if (tag == "test") return std::make_unique<RandomConvExtractor>();
    if (tag == "inception") {
        const char* dir = std::getenv("CONSINGAN_FX_DIR");
        if (!dir)
            throw InvalidArgumentError(
                "extractor 'inception' needs CONSINGAN_FX_DIR pointing at a directory with "
                "inception_pool1.fx");
        const auto path = std::filesystem::path(dir) / "inception_pool1.fx";
        return std::make_unique<ConvStackFileExtractor>(path.string());
    }
    if (tag.rfind("file:", 0) == 0)
        return std::make_unique<ConvStackFileExtractor>(tag.substr(5));
    std::string known;
    for (const auto& t : extractor_tags()) known += " " + t;
    throw InvalidArgumentError("unknown extractor '" + tag + "'; available:" + known);
}

// ---------------------------------------------------------------------------
// diversity
// ---------------------------------------------------------------------------

double diversity_score(const std::vector<Tensor>& samples, const Tensor& training_image) {
    if (samples.size() < 2)
        throw InvalidArgumentError("diversity_score needs at least 2 samples");
    for (const auto& s : samples)
        if (!s.same_shape(training_image))
            throw InvalidArgumentError("diversity_score: sample shape mismatch");

    const int h = training_image.dim(1), w = training_image.dim(2);
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t ns = samples.size();

    auto intensity = [&](const Tensor& img, size_t i) {
        return (static_cast<double>(img[i]) + img[plane + i] + img[2 * plane + i]) / 3.0;
    };

    // per-pixel std (population) across samples, averaged over pixels
    double total = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        double mean = 0.0;
        for (const auto& s : samples) mean += intensity(s, i);
        mean /= static_cast<double>(ns);
        double var = 0.0;
        for (const auto& s : samples) {
            const double d = intensity(s, i) - mean;
            var += d * d;
        }
        total += std::sqrt(var / static_cast<double>(ns));
    }
    const double avg_std = total / static_cast<double>(plane);

    double tmean = 0.0;
    for (size_t i = 0; i < plane; ++i) tmean += intensity(training_image, i);
    tmean /= static_cast<double>(plane);
    double tvar = 0.0;
    for (size_t i = 0; i < plane; ++i) {
        const double d = intensity(training_image, i) - tmean;
        tvar += d * d;
    }
    const double tstd = std::sqrt(tvar / static_cast<double>(plane));
    if (tstd == 0.0)
        throw InvalidArgumentError("diversity_score: training image has zero variance");
    return avg_std / tstd;
}

// ---------------------------------------------------------------------------
// SIFID
// ---------------------------------------------------------------------------

void feature_moments(const Tensor& features, std::vector<double>& mu, std::vector<double>& cov) {
    const int c = features.dim(0);
    const size_t positions = static_cast<size_t>(features.dim(1)) * features.dim(2);
    if (positions < 2) throw InvalidArgumentError("feature map needs >= 2 spatial positions");
    mu.assign(static_cast<size_t>(c), 0.0);
    for (int ch = 0; ch < c; ++ch) {
        const float* p = features.data() + static_cast<size_t>(ch) * positions;
        double acc = 0.0;
        for (size_t i = 0; i < positions; ++i) acc += p[i];
        mu[static_cast<size_t>(ch)] = acc / static_cast<double>(positions);
    }
    cov.assign(static_cast<size_t>(c) * c, 0.0);
    for (int a = 0; a < c; ++a) {
        const float* pa = features.data() + static_cast<size_t>(a) * positions;
        for (int b = a; b < c; ++b) {
            const float* pb = features.data() + static_cast<size_t>(b) * positions;
            double acc = 0.0;
            for (size_t i = 0; i < positions; ++i)
                acc += (pa[i] - mu[static_cast<size_t>(a)]) * (pb[i] - mu[static_cast<size_t>(b)]);
            // sample covariance, matching the usual FID convention
            const double v = acc / static_cast<double>(positions - 1);
            cov[static_cast<size_t>(a) * c + b] = v;
            cov[static_cast<size_t>(b) * c + a] = v;
        }
    }
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const std::string& what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed for " + what);
    Eigen::VectorXd ev = es.eigenvalues();
    const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-6 * scale)
            throw NumericError(what + " has a negative eigenvalue beyond tolerance");
        ev[i] = std::sqrt(std::max(0.0, ev[i]));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double sifid(const Tensor& real, const Tensor& fake, const FeatureExtractor& fx) {
    if (real.empty() || fake.empty()) throw InvalidArgumentError("sifid: empty image");
    const Tensor fr = fx.extract(real);
    const Tensor ff = fx.extract(fake);

    std::vector<double> mu_r, cov_r, mu_f, cov_f;
    feature_moments(fr, mu_r, cov_r);
    feature_moments(ff, mu_f, cov_f);

    const int c = fr.dim(0);
    Eigen::Map<const Eigen::VectorXd> mr(mu_r.data(), c), mf(mu_f.data(), c);
    Eigen::Map<const Eigen::MatrixXd> sr(cov_r.data(), c, c), sf(cov_f.data(), c, c);

    // tr((Sr Sf)^{1/2}) via the symmetrized product Sr^{1/2} Sf Sr^{1/2}
    const Eigen::MatrixXd sr_half = psd_sqrt(sr, "real covariance");
    Eigen::MatrixXd inner = sr_half * sf * sr_half;
    inner = 0.5 * (inner + inner.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    if (es.info() != Eigen::Success) throw NumericError("sifid eigendecomposition failed");
    double tr_sqrt = 0.0;
    const double scale = std::max(1.0, std::abs(es.eigenvalues().maxCoeff()));
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev < -1e-6 * scale)
            throw NumericError("sifid product matrix not PSD beyond tolerance");
        tr_sqrt += std::sqrt(std::max(0.0, ev));
    }

    const double value =
        (mr - mf).squaredNorm() + sr.trace() + sf.trace() - 2.0 * tr_sqrt;
    if (value < -1e-6) throw NumericError("sifid produced a negative distance");
    return std::max(0.0, value);
}

// ---------------------------------------------------------------------------
// evaluation protocol
// ---------------------------------------------------------------------------

EvalReport evaluate_model(const GrowingGenerator& g, const Tensor& training_image, int n_samples,
                          const FeatureExtractor& fx, uint64_t seed) {
    if (n_samples < 2) throw InvalidArgumentError("evaluate_model needs n_samples >= 2");
    const auto& res0 = g.resolutions().front();
    std::vector<Tensor> samples(static_cast<size_t>(n_samples));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n_samples; ++i) {
        RngStream rng(seed, static_cast<uint64_t>(i) + 1);
        Tensor z({3, res0.first, res0.second});
        for (size_t j = 0; j < z.numel(); ++j) z[j] = rng.normal_f();
        ag::NoGradGuard ng;
        samples[static_cast<size_t>(i)] = g.forward(z, NoiseMode::sampled, &rng).value();
    }
    EvalReport report;
    report.n_samples = n_samples;
    report.extractor_tag = fx.tag();
    report.diversity = diversity_score(samples, training_image);
    double acc = 0.0;
    for (const auto& s : samples) acc += sifid(training_image, s, fx);
    report.sifid = acc / static_cast<double>(n_samples);
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j{{"format", "consingan-eval-v1"},
                     {"diversity", report.diversity},
                     {"sifid", report.sifid},
                     {"n_samples", report.n_samples},
                     {"extractor", report.extractor_tag}};
    return j.dump(2);
}

EvalReport eval_report_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        EvalReport r;
        r.diversity = j.at("diversity").get<double>();
        r.sifid = j.at("sifid").get<double>();
        r.n_samples = j.at("n_samples").get<int>();
        r.extractor_tag = j.at("extractor").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("invalid eval report JSON: " + std::string(e.what()));
    }
}

void save_eval_report(const EvalReport& report, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + path);
        out << eval_report_to_json(report) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace consingan
