#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "gpda/checkpoint.hpp"
#include "gpda/models.hpp"
#include "test_util.hpp"

using namespace gpda;
using testutil::fd_grad;
using testutil::max_rel_err;
using testutil::random_mat;

namespace {

models::MlpStack manual_mlp(std::vector<Mat> weights, std::vector<Mat> biases) {
    models::MlpStack m;
    for (std::size_t i = 0; i < weights.size(); ++i)
        m.layers.push_back({ad::Tensor::param(weights[i]), ad::Tensor::param(biases[i])});
    return m;
}

}  // namespace

TEST_CASE("feature_extract basics") {
    SUBCASE("zero weights and biases give zero features") {
        auto e = manual_mlp({Mat(3, 4), Mat(4, 2)}, {Mat(1, 4), Mat(1, 2)});
        Rng rng(1);
        const Mat out = models::feature_extract(e, random_mat(rng, 5, 3)).value();
        for (double v : out.a) CHECK(v == 0.0);
    }
    SUBCASE("identity single layer passes inputs through") {
        auto e = manual_mlp({Mat::eye(3)}, {Mat(1, 3)});
        Rng rng(2);
        Mat x = random_mat(rng, 4, 3);
        CHECK(models::feature_extract(e, x).value() == x);
    }
    SUBCASE("row-wise map: permuting input rows permutes output rows") {
        Rng rng(3);
        auto e = manual_mlp({random_mat(rng, 3, 5), random_mat(rng, 5, 2)},
                            {random_mat(rng, 1, 5), random_mat(rng, 1, 2)});
        Mat x = random_mat(rng, 4, 3);
        Mat xp(4, 3);
        const int perm[4] = {2, 0, 3, 1};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) xp(i, j) = x(perm[i], j);
        const Mat y = models::feature_extract(e, x).value();
        const Mat yp = models::feature_extract(e, xp).value();
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) CHECK(yp(i, j) == y(perm[i], j));
    }
    SUBCASE("width mismatch raises a shape error") {
        auto e = manual_mlp({Mat(3, 4)}, {Mat(1, 4)});
        CHECK_THROWS_AS(models::feature_extract(e, Mat(2, 5)), ShapeError);
    }
}

TEST_CASE("gcn_forward identity case") {
    // all-distinct classes make P = I; identity filter keeps Z = X exactly
    const auto g = graph::build_adjacency(graph::ground_truth_labels({0, 1, 2}, 3));
    CHECK(g.P == Mat::eye(3));
    models::GcnHead head;
    head.filters.push_back(ad::Tensor::param(Mat::eye(4)));
    Rng rng(5);
    Mat x = random_mat(rng, 3, 4);
    CHECK(models::gcn_forward(head, ad::Tensor::constant(x), g).value() == x);
}

TEST_CASE("gcn_forward two same-class nodes hand oracle") {
    const auto g = graph::build_adjacency(graph::ground_truth_labels({0, 0}, 2));
    models::GcnHead head;
    head.filters.push_back(ad::Tensor::param(Mat::eye(3)));
    Rng rng(7);
    Mat x = random_mat(rng, 2, 3);
    const Mat z = models::gcn_forward(head, ad::Tensor::constant(x), g).value();
    for (int j = 0; j < 3; ++j) {
        CHECK(z(0, j) == doctest::Approx(2.0 / 3.0 * x(0, j) + 1.0 / 3.0 * x(1, j)).epsilon(1e-14));
        CHECK(z(1, j) == doctest::Approx(1.0 / 3.0 * x(0, j) + 2.0 / 3.0 * x(1, j)).epsilon(1e-14));
    }
}

TEST_CASE("gcn_forward equals the dense propagation oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + rng.uniform_int(8);
        const int classes = 2 + rng.uniform_int(4);
        const int f = 1 + rng.uniform_int(5);
        const int f2 = 1 + rng.uniform_int(5);
        std::vector<int> ids;
        for (int i = 0; i < n; ++i) ids.push_back(rng.uniform_int(classes));
        const auto g = graph::build_adjacency(graph::ground_truth_labels(ids, classes));
        Mat x = random_mat(rng, n, f);
        Mat theta = random_mat(rng, f, f2);
        models::GcnHead head;
        head.filters.push_back(ad::Tensor::param(theta));
        const Mat z = models::gcn_forward(head, ad::Tensor::constant(x), g).value();
        // naive triple product, written out independently
        Mat px(n, f);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < f; ++j) {
                double s = 0.0;
                for (int k = 0; k < n; ++k) s += g.P(i, k) * x(k, j);
                px(i, j) = s;
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < f2; ++j) {
                double s = 0.0;
                for (int k = 0; k < f; ++k) s += px(i, k) * theta(k, j);
                CHECK(std::abs(z(i, j) - s) <= 1e-12);
            }
    }
}

TEST_CASE("gcn_forward is permutation-equivariant under conjugated graphs") {
    Rng rng(23);
    const int n = 6, classes = 3, f = 4;
    std::vector<int> ids{0, 1, 1, 2, 0, 2};
    Mat x = random_mat(rng, n, f);
    models::GcnHead head;
    head.filters.push_back(ad::Tensor::param(random_mat(rng, f, f)));
    head.filters.push_back(ad::Tensor::param(random_mat(rng, f, f)));

    const auto g = graph::build_adjacency(graph::ground_truth_labels(ids, classes));
    const Mat z = models::gcn_forward(head, ad::Tensor::constant(x), g).value();

    std::vector<int> perm{3, 0, 5, 1, 4, 2};
    std::vector<int> pids(n);
    Mat px(n, f);
    for (int i = 0; i < n; ++i) {
        pids[static_cast<std::size_t>(i)] = ids[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        for (int j = 0; j < f; ++j) px(i, j) = x(perm[static_cast<std::size_t>(i)], j);
    }
    const auto gp = graph::build_adjacency(graph::ground_truth_labels(pids, classes));
    const Mat zp = models::gcn_forward(head, ad::Tensor::constant(px), gp).value();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < f; ++j)
            CHECK(std::abs(zp(i, j) - z(perm[static_cast<std::size_t>(i)], j)) <= 1e-12);
}

TEST_CASE("gcn_forward shape errors") {
    const auto g = graph::build_adjacency(graph::ground_truth_labels({0, 1}, 2));
    models::GcnHead head;
    head.filters.push_back(ad::Tensor::param(Mat(4, 4)));
    CHECK_THROWS_AS(models::gcn_forward(head, ad::Tensor::constant(Mat(3, 4)), g), ShapeError);
    CHECK_THROWS_AS(models::gcn_forward(head, ad::Tensor::constant(Mat(2, 5)), g), ShapeError);
}

TEST_CASE("classify") {
    SUBCASE("zero parameters give zero logits and a uniform softmax") {
        auto f = manual_mlp({Mat(4, 6)}, {Mat(1, 6)});
        Rng rng(13);
        const Mat logits = models::classify(f, ad::Tensor::constant(random_mat(rng, 3, 4))).value();
        for (double v : logits.a) CHECK(v == 0.0);
        const Mat probs = ad::softmax_rows(logits);
        for (double v : probs.a) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-15));
    }
    SUBCASE("empty batch gives a 0 x C result") {
        auto f = manual_mlp({Mat(4, 6)}, {Mat(1, 6)});
        const auto out = models::classify(f, ad::Tensor::constant(Mat(0, 4)));
        CHECK(out.rows() == 0);
        CHECK(out.cols() == 6);
    }
    SUBCASE("logit gradients match finite differences") {
        Rng rng(17);
        auto f = manual_mlp({random_mat(rng, 3, 4), random_mat(rng, 4, 2)},
                            {random_mat(rng, 1, 4), random_mat(rng, 1, 2)});
        Mat x = random_mat(rng, 5, 3);
        auto expr = [&] {
            return ad::sum(ad::sigmoid(models::classify(f, ad::Tensor::constant(x))));
        };
        ad::Tape tape;
        {
            ad::TapeScope scope(tape);
            tape.backward(expr());
        }
        auto eval = [&] { return expr().scalar(); };
        for (const auto& layer : f.layers) {
            CHECK(max_rel_err(layer.W.grad(), fd_grad(layer.W, eval)) < 1e-4);
            CHECK(max_rel_err(layer.b.grad(), fd_grad(layer.b, eval)) < 1e-4);
        }
    }
}

TEST_CASE("discriminate") {
    Rng rng(19);
    SUBCASE("zero parameters give 0.5 everywhere") {
        auto d = manual_mlp({Mat(4, 3), Mat(3, 1)}, {Mat(1, 3), Mat(1, 1)});
        const Mat out =
            models::discriminate(d, ad::Tensor::constant(random_mat(rng, 6, 4)), 1.0).value();
        for (double v : out.a) CHECK(v == 0.5);
    }
    SUBCASE("outputs stay strictly inside (0,1)") {
        auto d = manual_mlp({random_mat(rng, 4, 3, -3, 3), random_mat(rng, 3, 1, -3, 3)},
                            {random_mat(rng, 1, 3), random_mat(rng, 1, 1)});
        const Mat out =
            models::discriminate(d, ad::Tensor::constant(random_mat(rng, 6, 4, -50, 50)), 1.0)
                .value();
        for (double v : out.a) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    SUBCASE("forward values do not depend on the reversal coefficient") {
        auto d = manual_mlp({random_mat(rng, 4, 3), random_mat(rng, 3, 1)},
                            {random_mat(rng, 1, 3), random_mat(rng, 1, 1)});
        Mat feats = random_mat(rng, 5, 4);
        const Mat a = models::discriminate(d, ad::Tensor::constant(feats), 0.0).value();
        const Mat b = models::discriminate(d, ad::Tensor::constant(feats), 0.7).value();
        CHECK(a == b);
    }
    SUBCASE("coefficient zero cuts the adversarial gradient to the features") {
        auto d = manual_mlp({random_mat(rng, 4, 3), random_mat(rng, 3, 1)},
                            {random_mat(rng, 1, 3), random_mat(rng, 1, 1)});
        ad::Tensor feats = ad::Tensor::param(random_mat(rng, 5, 4));
        ad::Tape tape;
        ad::TapeScope scope(tape);
        tape.backward(ad::sum(models::discriminate(d, feats, 0.0)));
        for (double g : feats.grad().a) CHECK(g == 0.0);
        // ...while D's own parameters still learn
        double dsum = 0.0;
        for (const auto& layer : d.layers)
            for (double g : layer.W.grad().a) dsum += std::abs(g);
        CHECK(dsum > 0.0);
    }
}

TEST_CASE("init_models determinism and shape") {
    models::Architecture arch;
    arch.input_dim = 3;
    arch.class_count = 4;
    arch.extractor_hidden = {8};
    arch.feature_dim = 6;
    arch.gcn_dims = {6, 6};
    arch.domain_hidden = {5};

    const auto m1 = models::init_models(arch, 42);
    const auto m2 = models::init_models(arch, 42);
    const auto m3 = models::init_models(arch, 43);

    const auto p1 = m1.named_parameters();
    const auto p2 = m2.named_parameters();
    const auto p3 = m3.named_parameters();
    REQUIRE(p1.size() == p2.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].second.value() == p2[i].second.value());
        if (!(p1[i].second.value() == p3[i].second.value())) any_diff = true;
    }
    CHECK(any_diff);

    // biases start at zero
    for (const auto& [name, p] : p1)
        if (name.ends_with(".b"))
            for (double v : p.value().a) CHECK(v == 0.0);

    // expected parameter list
    CHECK(p1.size() == 2 * (2 + 1 + 1 + 2) + 2);  // E(2), Fs(1), Ft(1), D(2) layers + 2 filters
}

TEST_CASE("glorot draws are centered") {
    // 10k draws from a fan_in=50, fan_out=50 layer: mean within 3 sigma of 0
    models::Architecture arch;
    arch.input_dim = 50;
    arch.class_count = 2;
    arch.extractor_hidden = {};
    arch.feature_dim = 200;
    arch.gcn_dims = {};
    arch.domain_hidden = {};
    arch.use_gcn = false;
    const auto m = models::init_models(arch, 7);
    const Mat& w = m.extractor.layers[0].W.value();  // 50 x 200 = 10k draws
    REQUIRE(w.size() == 10000);
    const double a = std::sqrt(6.0 / (50.0 + 200.0));
    double mean = 0.0;
    for (double v : w.a) {
        CHECK(std::abs(v) <= a);
        mean += v;
    }
    mean /= static_cast<double>(w.size());
    const double sigma_mean = a / std::sqrt(3.0 * static_cast<double>(w.size()));
    CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

TEST_CASE("checkpoint round-trip is exact") {
    models::Architecture arch;
    arch.input_dim = 3;
    arch.class_count = 4;
    arch.extractor_hidden = {8};
    arch.feature_dim = 6;
    arch.gcn_dims = {6, 6};
    arch.domain_hidden = {5};
    auto m = models::init_models(arch, 123);

    const auto dir = std::filesystem::temp_directory_path() / "gpda_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string bin = (dir / "model.bin").string();
    const std::string man = (dir / "model.json").string();
    models::save_checkpoint(m, 123, bin, man);

    const auto loaded = models::load_checkpoint(bin, man);
    CHECK(loaded.seed == 123);
    CHECK(loaded.models.arch.feature_dim == 6);
    const auto pa = m.named_parameters();
    const auto pb = loaded.models.named_parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].first == pb[i].first);
        CHECK(pa[i].second.value() == pb[i].second.value());  // bitwise
    }

    SUBCASE("corrupted magic is rejected with a format error") {
        std::FILE* f = std::fopen(bin.c_str(), "r+b");
        REQUIRE(f);
        std::fputc('X', f);
        std::fclose(f);
        CHECK_THROWS_AS(models::load_checkpoint(bin, man), FormatError);
    }
}
