#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "apnav/policies.hpp"

using namespace apnav;
using std::numbers::pi;

namespace {

Dataset tiny_dataset()
{
    WorldConfig cfg;
    cfg.grid = make_grid(16, 6, 1.0, 30.0);
    cfg.obs_dim = 8;
    return generate_dataset(World(cfg), preset_car(), 0.9, 1.0, 2);
}

} // namespace

TEST(StaticPolicy, AlwaysZero)
{
    const auto p = policy_static();
    Rng rng(1);
    EXPECT_EQ(p->name(), "static");
    for (int k = 0; k < 10; ++k)
        EXPECT_EQ(p->propose(Observation(4, k * 0.1), {k * 0.3, 5.0}, rng), (Proposal{0.0, 0.0}));
}

TEST(RandomPolicy, DeterministicPerStream)
{
    const auto g = make_grid(76, 65, 1.0, 60.0);
    const auto p = policy_random(g);
    Rng a(17), b(17), c(18);
    for (int k = 0; k < 20; ++k) {
        const auto pa = p->propose({}, {}, a);
        EXPECT_EQ(pa, p->propose({}, {}, b));
        EXPECT_NE(pa, p->propose({}, {}, c));
    }
}

TEST(RandomPolicy, BoundedWithCenteredRotation)
{
    const auto g = make_grid(76, 65, 1.0, 60.0);
    const auto p = policy_random(g);
    Rng rng(5);
    double sum = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const auto q = p->propose({}, {}, rng);
        ASSERT_GE(q.dtheta, -pi);
        ASSERT_LE(q.dtheta, pi);
        ASSERT_GE(q.dr, -59.0);
        ASSERT_LE(q.dr, 59.0);
        sum += q.dtheta;
    }
    EXPECT_LT(std::abs(sum / 10000), 0.1);
}

TEST(Quantize, BinBoundaries)
{
    EXPECT_EQ(quantize_label(0.40, 0.0), (DirectionClass{1, 0}));
    EXPECT_EQ(quantize_label(0.0, 0.0), (DirectionClass{0, 0}));
    EXPECT_EQ(quantize_label(0.05, 0.5), (DirectionClass{0, 0}));
    EXPECT_EQ(quantize_label(0.5, 5.0), (DirectionClass{1, 1}));
    EXPECT_EQ(quantize_label(-0.51, -5.01), (DirectionClass{-2, -2}));
    EXPECT_EQ(quantize_label(-0.2, 2.0), (DirectionClass{-1, 1}));
    EXPECT_EQ(quantize_label(3.0, -0.6), (DirectionClass{2, -1}));
}

TEST(Quantize, ClassIndexBijection)
{
    for (std::size_t k = 0; k < kNumClasses; ++k)
        EXPECT_EQ(class_index(class_from_index(k)), k);
    EXPECT_EQ(class_index({0, 0}), 12u);
}

TEST(Centroid, MeanOfClassMembers)
{
    Dataset ds;
    ds.world.grid = make_grid(8, 2, 1.0, 10.0);
    auto rec = [](double dt, double dr) {
        DatasetRecord r;
        r.label = {dt, dr, true};
        return r;
    };
    ds.records = {rec(0.2, 0.0), rec(0.4, 0.0), rec(-1.0, 3.0)};
    const auto c = class_centroid({1, 0}, ds);
    EXPECT_NEAR(c.dtheta, 0.3, 1e-15);
    EXPECT_EQ(c.dr, 0.0);
    // Empty classes fall back to the bin midpoint.
    const auto empty = class_centroid({-1, 2}, ds);
    EXPECT_NEAR(empty.dtheta, -0.275, 1e-15);
    EXPECT_NEAR(empty.dr, 0.5 * (5.0 + 9.0), 1e-15);
    const auto far = class_centroid({2, -2}, ds);
    EXPECT_NEAR(far.dtheta, 0.5 * (0.5 + pi), 1e-15);
}

TEST(Classifier, SingleClassDataset)
{
    auto ds = tiny_dataset();
    for (auto& r : ds.records)
        r.label = {0.3, 2.0, true};
    ClassifierTrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 100;
    cfg.lr = 0.01;
    const auto model = train_classifier(ds, cfg);
    const std::size_t expected = class_index({1, 1});
    for (const auto& r : ds.records)
        EXPECT_EQ(predict_class(model, r.observation), expected);
    const auto policy = policy_classifier(model);
    Rng rng(1);
    const auto p = policy->propose(ds.records[3].observation, {}, rng);
    EXPECT_NEAR(p.dtheta, 0.3, 1e-12);
    EXPECT_NEAR(p.dr, 2.0, 1e-12);
}

TEST(Classifier, SoftmaxSumsToOne)
{
    const auto ds = tiny_dataset();
    ClassifierTrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 2;
    const auto model = train_classifier(ds, cfg);
    for (const auto& r : ds.records) {
        const VectorXd p = model.mlp.forward(r.observation);
        EXPECT_NEAR(p.sum(), 1.0, 1e-9);
        EXPECT_GE(p.minCoeff(), 0.0);
    }
}

TEST(Classifier, ArgmaxInvariantToLogitShift)
{
    const auto ds = tiny_dataset();
    ClassifierTrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 3;
    auto model = train_classifier(ds, cfg);
    auto shifted = model;
    shifted.mlp.params().back().bias.array() += 7.5;
    for (const auto& r : ds.records)
        EXPECT_EQ(predict_class(model, r.observation), predict_class(shifted, r.observation));
}

TEST(Classifier, DeterministicAndErrors)
{
    const auto ds = tiny_dataset();
    ClassifierTrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 5;
    const auto a = train_classifier(ds, cfg);
    const auto b = train_classifier(ds, cfg);
    EXPECT_TRUE(a.mlp.params()[0].weight == b.mlp.params()[0].weight);
    Dataset empty = ds;
    empty.records.clear();
    EXPECT_THROW(train_classifier(empty, cfg), EmptyDatasetError);
}

TEST(Classifier, ModelRoundTrip)
{
    const auto ds = tiny_dataset();
    ClassifierTrainConfig cfg;
    cfg.hidden = {6};
    cfg.epochs = 2;
    const auto model = train_classifier(ds, cfg);
    const auto back = classifier_from_json(json::parse(classifier_to_json(model).dump()));
    EXPECT_TRUE(back.mlp.params()[1].weight == model.mlp.params()[1].weight);
    for (std::size_t k = 0; k < kNumClasses; ++k)
        EXPECT_EQ(back.centroids[k], model.centroids[k]);
}

TEST(OraclePolicy, ReturnsStoredLabel)
{
    const auto ds = tiny_dataset();
    const auto oracle = policy_oracle(ds);
    Rng rng(1);
    for (const auto& r : ds.records) {
        const auto p = oracle->propose({}, r.pose, rng);
        EXPECT_EQ(p.dtheta, r.label.dtheta);
        EXPECT_EQ(p.dr, r.label.dr);
    }
    // Off-grid poses snap to the nearest grid point; out-of-range radii clamp.
    const auto& g = ds.world.grid;
    const auto near = oracle->propose({}, {g.angle_step() * 3 + 0.01, 100.0}, rng);
    const auto& rec = ds.records[g.flat({3, g.n_radii() - 1})];
    EXPECT_EQ(near, (Proposal{rec.label.dtheta, rec.label.dr}));
}

TEST(RegressionPolicy, WithinOutputBounds)
{
    const auto g = make_grid(76, 65, 1.0, 60.0);
    const auto policy = policy_regression(init_net({4, 8, 2}, 3), g);
    Rng rng(2);
    for (int k = 0; k < 500; ++k) {
        Observation x(4);
        for (double& v : x)
            v = rng.uniform(-5, 5);
        const auto p = policy->propose(x, {}, rng);
        ASSERT_GT(p.dtheta, -pi);
        ASSERT_LT(p.dtheta, pi);
        ASSERT_GT(p.dr, -59.0);
        ASSERT_LT(p.dr, 59.0);
    }
}
