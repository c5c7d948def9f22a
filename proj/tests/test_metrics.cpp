#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "consingan/metrics.hpp"
#include "consingan/pyramid.hpp"
#include "test_helpers.hpp"

using namespace consingan;
using testutil::random_tensor;

namespace {

// serves one stored feature map for the marker image (all pixels = 1), the
// other for anything else; lets tests drive sifid with exact feature maps
struct PairExtractor : FeatureExtractor {
    Tensor real_features, fake_features;
    std::string tag() const override { return "test-pair"; }
    int channels() const override { return real_features.dim(0); }
    Tensor extract(const Tensor& rgb) const override {
        return rgb[0] == 1.0f ? real_features : fake_features;
    }
};

Tensor marker(float v) { return Tensor({3, 4, 4}, v); }

// brute-force oracle: moments by direct loops, Frechet via the complex
// eigenvalues of the covariance product
double frechet_oracle(const Tensor& fr, const Tensor& ff) {
    auto moments = [](const Tensor& f, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
        const int c = f.dim(0);
        const int p = f.dim(1) * f.dim(2);
        mu.setZero(c);
        for (int a = 0; a < c; ++a)
            for (int i = 0; i < p; ++i) mu[a] += f[static_cast<size_t>(a) * p + i];
        mu /= p;
        cov.setZero(c, c);
        for (int a = 0; a < c; ++a)
            for (int b = 0; b < c; ++b) {
                double acc = 0.0;
                for (int i = 0; i < p; ++i)
                    acc += (f[static_cast<size_t>(a) * p + i] - mu[a]) *
                           (f[static_cast<size_t>(b) * p + i] - mu[b]);
                cov(a, b) = acc / (p - 1);
            }
    };
    Eigen::VectorXd mu_r, mu_f;
    Eigen::MatrixXd cov_r, cov_f;
    moments(fr, mu_r, cov_r);
    moments(ff, mu_f, cov_f);
    const Eigen::MatrixXd prod = cov_r * cov_f;
    const Eigen::EigenSolver<Eigen::MatrixXd> es(prod);
    double tr_sqrt = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const auto ev = es.eigenvalues()[i];
        tr_sqrt += std::sqrt(std::max(0.0, ev.real()));
    }
    return (mu_r - mu_f).squaredNorm() + cov_r.trace() + cov_f.trace() - 2.0 * tr_sqrt;
}

}  // namespace

TEST_CASE("diversity of identical samples is exactly zero") {
    const Tensor train = testutil::synthetic_image(20, 24);
    const std::vector<Tensor> samples(5, train);
    CHECK(diversity_score(samples, train) == 0.0);
}

TEST_CASE("two-point construction gives c over the training std") {
    const Tensor train = testutil::synthetic_image(20, 24, 3);
    const double c = 0.17;
    Tensor up = train, down = train;
    for (size_t i = 0; i < train.numel(); ++i) {
        up[i] += static_cast<float>(c);
        down[i] -= static_cast<float>(c);
    }
    // training-image intensity std, brute force
    const size_t plane = static_cast<size_t>(20) * 24;
    double mean = 0.0;
    std::vector<double> intens(plane);
    for (size_t i = 0; i < plane; ++i) {
        intens[i] = (static_cast<double>(train[i]) + train[plane + i] + train[2 * plane + i]) / 3.0;
        mean += intens[i];
    }
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (double v : intens) var += (v - mean) * (v - mean);
    const double tstd = std::sqrt(var / static_cast<double>(plane));

    const double got = diversity_score({up, down}, train);
    CHECK(std::abs(got - c / tstd) < 1e-6);
}

TEST_CASE("diversity is invariant to sample order") {
    const Tensor train = testutil::synthetic_image(16, 16, 5);
    std::vector<Tensor> samples;
    for (uint64_t s = 0; s < 4; ++s) samples.push_back(random_tensor({3, 16, 16}, 50 + s));
    const double a = diversity_score(samples, train);
    std::reverse(samples.begin(), samples.end());
    CHECK(diversity_score(samples, train) == a);
}

TEST_CASE("diversity input validation") {
    const Tensor train = testutil::synthetic_image(16, 16, 6);
    CHECK_THROWS_AS(diversity_score({train}, train), InvalidArgumentError);
    CHECK_THROWS_AS(diversity_score({train, random_tensor({3, 8, 8}, 7)}, train),
                    InvalidArgumentError);
}

TEST_CASE("sifid of an image with itself vanishes") {
    const RandomConvExtractor fx(8);
    const Tensor img = testutil::synthetic_image(48, 48, 8);
    CHECK(sifid(img, img, fx) <= 1e-6);
}

TEST_CASE("mean-shifted features give unit Frechet distance") {
    PairExtractor fx;
    fx.real_features = random_tensor({1, 12, 12}, 9);
    fx.fake_features = fx.real_features;
    for (size_t i = 0; i < fx.fake_features.numel(); ++i) fx.fake_features[i] += 1.0f;
    // identical covariance, means one apart -> distance 1
    CHECK(sifid(marker(1.0f), marker(0.0f), fx) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sifid matches the brute-force Frechet oracle") {
    RngStream shape_rng(10);
    for (uint64_t trial = 0; trial < 12; ++trial) {
        const int c = 1 + static_cast<int>(shape_rng.integer(8));
        PairExtractor fx;
        fx.real_features = random_tensor({c, 9, 11}, 100 + trial);
        fx.fake_features = random_tensor({c, 9, 11}, 200 + trial, 1.3f);
        const double got = sifid(marker(1.0f), marker(0.0f), fx);
        const double want = frechet_oracle(fx.real_features, fx.fake_features);
        CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("sifid is symmetric") {
    const RandomConvExtractor fx(8);
    const Tensor a = testutil::synthetic_image(48, 56, 11);
    const Tensor b = testutil::synthetic_image(48, 56, 12);
    CHECK(std::abs(sifid(a, b, fx) - sifid(b, a, fx)) <= 1e-8);
}

TEST_CASE("growing noise strictly increases the median sifid") {
    const RandomConvExtractor fx(8);
    const Tensor real = testutil::synthetic_image(64, 64, 13);
    double prev_median = -1.0;
    for (double sigma : {0.05, 0.15, 0.4}) {
        std::vector<double> vals;
        for (uint64_t trial = 0; trial < 5; ++trial) {
            RngStream rng(300 + trial);
            Tensor fake = real;
            for (size_t i = 0; i < fake.numel(); ++i)
                fake[i] += static_cast<float>(sigma * rng.normal());
            vals.push_back(sifid(real, fake, fx));
        }
        std::sort(vals.begin(), vals.end());
        const double median = vals[2];
        CHECK(median > prev_median);
        prev_median = median;
    }
}

TEST_CASE("random-conv extractor is deterministic and download-free") {
    const RandomConvExtractor a(8, 7), b(8, 7);
    const Tensor img = testutil::synthetic_image(40, 40, 14);
    const Tensor fa = a.extract(img), fb = b.extract(img);
    REQUIRE(fa.shape() == fb.shape());
    for (size_t i = 0; i < fa.numel(); ++i) CHECK(fa[i] == fb[i]);
    CHECK(a.tag() == b.tag());
}

TEST_CASE("file extractor round trips through the weights format") {
    testutil::TempDir dir("fx");
    const std::string path = dir.str() + "/stack.fx";
    std::vector<Tensor> ws{random_tensor({6, 3, 3, 3}, 15, 0.3f),
                           random_tensor({4, 6, 3, 3}, 16, 0.3f)};
    std::vector<Tensor> bs{random_tensor({6}, 17, 0.1f), random_tensor({4}, 18, 0.1f)};
    ConvStackFileExtractor::write_stack(path, "demo-stack", ws, bs, {2, 1});

    const ConvStackFileExtractor fx(path);
    CHECK(fx.tag() == "demo-stack");
    CHECK(fx.channels() == 4);
    const Tensor img = testutil::synthetic_image(32, 32, 19);
    const Tensor features = fx.extract(img);
    CHECK(features.dim(0) == 4);

    const auto via_tag = make_extractor("file:" + path);
    const Tensor f2 = via_tag->extract(img);
    for (size_t i = 0; i < features.numel(); ++i) CHECK(features[i] == f2[i]);
}

TEST_CASE("extractor tag resolution") {
    CHECK(make_extractor("test")->tag().rfind("test-randomconv", 0) == 0);
    CHECK_THROWS_AS(make_extractor("nonsense"), InvalidArgumentError);
    try {
        make_extractor("nonsense");
    } catch (const InvalidArgumentError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("test") != std::string::npos);
        CHECK(msg.find("inception") != std::string::npos);
    }
}

TEST_CASE("evaluate_model on a constant generator: zero diversity, positive sifid") {
    const auto spec =
        pyramid::make_spec({32, 32}, pyramid::Mode::old_geometric, 0.55, 25, 250, 1);
    RngStream rng(20);
    GrowingGenerator g(spec.resolutions, 8, 0.1, rng);
    for (const auto& p : g.all_params()) {
        Tensor& t = const_cast<ag::Var&>(p).mutable_value();
        std::fill_n(t.data(), t.numel(), 0.0f);
    }
    const Tensor train = testutil::synthetic_image(32, 32, 21);
    const RandomConvExtractor fx(8);
    const EvalReport report = evaluate_model(g, train, 4, fx, 99);
    CHECK(report.diversity == 0.0);
    CHECK(report.sifid > 0.0);
    CHECK(report.n_samples == 4);
    CHECK(report.extractor_tag == fx.tag());
}

TEST_CASE("eval report serializes and parses") {
    EvalReport r;
    r.diversity = 0.5;
    r.sifid = 0.031;
    r.n_samples = 100;
    r.extractor_tag = "test-randomconv-c8";
    const EvalReport back = eval_report_from_json(eval_report_to_json(r));
    CHECK(back.diversity == r.diversity);
    CHECK(back.sifid == r.sifid);
    CHECK(back.n_samples == r.n_samples);
    CHECK(back.extractor_tag == r.extractor_tag);
}
