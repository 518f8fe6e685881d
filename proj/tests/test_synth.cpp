#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "gridcast/community.hpp"
#include "gridcast/dataset.hpp"
#include "gridcast/loadshape.hpp"
#include "test_support.hpp"

using namespace gridcast;
using namespace gridcast::testing;

TEST_CASE("mu-law companding fixes the endpoints") {
    for (double mu : {1.0, 12.0, 255.0}) {
        CHECK(mu_law_compress(0.0, mu) == 0.0);
        CHECK(mu_law_compress(1.0, mu) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(mu_law_expand(0.0, mu) == 0.0);
        CHECK(mu_law_expand(1.0, mu) == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("mu-law midpoint value at mu 255") {
    // ln(1 + 255 * 0.5) / ln(256) = ln(128.5)/ln(256)
    double expected = std::log(128.5) / std::log(256.0);
    CHECK(mu_law_compress(0.5, 255.0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(mu_law_compress(0.5, 255.0) == doctest::Approx(0.8757).epsilon(1e-4));
}

TEST_CASE("compress and expand are inverses") {
    for (double mu : {2.0, 50.0, 255.0})
        for (double x : {0.1, 0.37, 0.5, 0.93})
            CHECK(mu_law_expand(mu_law_compress(x, mu), mu) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("companding is strictly monotone") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        double mu = std::exp(rng.uniform(0.0, std::log(255.0)));
        double x1 = rng.uniform01(), x2 = rng.uniform01();
        if (x1 == x2) continue;
        if (x1 > x2) std::swap(x1, x2);
        CHECK(mu_law_compress(x1, mu) < mu_law_compress(x2, mu));
        CHECK(mu_law_expand(x1, mu) < mu_law_expand(x2, mu));
    }
}

TEST_CASE("nonpositive mu is rejected") {
    CHECK_THROWS_AS(mu_law_compress(0.5, 0.0), Error);
    CHECK_THROWS_AS(mu_law_compress(0.5, -3.0), Error);
    LoadShape base{"base", {0.5, 0.6}};
    CompandingConfig cfg;
    cfg.mu_values = {-1.0};
    CHECK_THROWS_AS(mu_law_family(base, cfg, 2), Error);
}

TEST_CASE("family generation is deterministic and bounded") {
    LoadShape base = synth_base_shape(500, 3);
    CompandingConfig cfg;
    cfg.seed = 99;
    auto a = mu_law_family(base, cfg, 6);
    auto b = mu_law_family(base, cfg, 6);
    REQUIRE(a.size() == 6);
    for (std::size_t k = 0; k < a.size(); ++k) {
        REQUIRE(a[k].multipliers.size() == 500);
        for (std::size_t t = 0; t < 500; ++t) {
            CHECK(a[k].multipliers[t] == b[k].multipliers[t]);
            CHECK(a[k].multipliers[t] >= 0.0);
            CHECK(a[k].multipliers[t] <= 1.0);
        }
    }
}

TEST_CASE("moving median keeps constants and monotone series") {
    CHECK(moving_median({5, 5, 5, 5}) == std::vector<double>{5, 5, 5, 5});
    CHECK(moving_median({1, 2, 3, 4}) == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("moving median removes an isolated spike") {
    CHECK(moving_median({1, 9, 1}) == std::vector<double>{1, 1, 1});
}

TEST_CASE("moving median validates the window") {
    CHECK_THROWS_AS(moving_median({1, 2, 3}, 2), Error);
    CHECK_THROWS_AS(moving_median({}, 3), Error);
    CHECK(moving_median({1, 9, 1}, 1) == std::vector<double>{1, 9, 1});
}

namespace {

struct SynthFixture {
    Feeder feeder;
    ClusterTree tree;
    std::vector<IoLayout> layouts;
    std::map<std::string, LoadShape> shapes;
    SynthOptions opts;

    explicit SynthFixture(int n_samples, std::uint64_t seed = 5) {
        feeder = make_random_radial_feeder(9, seed, false);
        opts.n_samples = n_samples;
        opts.workers = 2;
        FlowGraph g = FlowGraph::from_feeder(feeder);
        Partition part = detect_communities(g);
        tree = legalize_to_cluster_tree(feeder, part);
        layouts = allocate_io(tree, feeder);
        shapes = build_shape_table(feeder, n_samples, opts);
    }
};

}  // namespace

TEST_CASE("1000 samples split 800 train / 200 test") {
    SynthFixture fx(1000);
    ClusterDataset ds = generate_cluster_dataset(fx.feeder, fx.tree, 0, fx.shapes, fx.opts);
    CHECK(ds.train_rows.size() == 800);
    CHECK(ds.test_rows.size() == 200);
    // no overlap
    std::set<int> train(ds.train_rows.begin(), ds.train_rows.end());
    for (int r : ds.test_rows) CHECK(train.count(r) == 0);
}

TEST_CASE("dataset columns match the layout with fed slots and boundary consistency") {
    SynthFixture fx(60);
    SampleBank bank = generate_samples(fx.feeder, fx.shapes, fx.opts);

    std::vector<ClusterDataset> sets;
    for (int ci = 0; ci < fx.tree.size(); ++ci)
        sets.push_back(assemble_cluster_dataset(bank, fx.feeder, fx.tree, ci,
                                                fx.layouts[static_cast<std::size_t>(ci)], fx.opts));

    for (int ci = 0; ci < fx.tree.size(); ++ci) {
        const Cluster& c = fx.tree.clusters[static_cast<std::size_t>(ci)];
        const IoLayout& io = fx.layouts[static_cast<std::size_t>(ci)];
        CHECK(sets[static_cast<std::size_t>(ci)].inputs.cols() ==
              static_cast<long>(io.inputs.size()));
        CHECK(io.inputs.size() == 6 * c.buses.size() + 6 * c.children.size());

        // child head outputs equal parent fed inputs, same rows, bit for bit
        for (int child : c.children) {
            const ClusterDataset& child_ds = sets[static_cast<std::size_t>(child)];
            const IoLayout& child_io = fx.layouts[static_cast<std::size_t>(child)];
            REQUIRE(child_io.head_output_offset >= 0);
            int head_bus = fx.tree.clusters[static_cast<std::size_t>(child)].head_bus;
            // locate this child's fed block in the parent
            int fed_col = -1;
            for (std::size_t col = 0; col < io.inputs.size(); ++col)
                if (io.inputs[col].quantity == Quantity::PFed && io.inputs[col].bus == head_bus &&
                    io.inputs[col].phase == Phase::A) {
                    fed_col = static_cast<int>(col);
                    break;
                }
            REQUIRE(fed_col >= 0);
            for (int s = 0; s < 6; ++s)
                for (int r = 0; r < sets[static_cast<std::size_t>(ci)].inputs.rows(); ++r)
                    CHECK(sets[static_cast<std::size_t>(ci)].inputs(r, fed_col + s) ==
                          child_ds.outputs(r, child_io.head_output_offset + s));
        }
    }
}

TEST_CASE("datasets are bit-identical across regeneration and worker counts") {
    SynthFixture fx(50);
    SynthOptions serial = fx.opts;
    serial.workers = 1;
    ClusterDataset a = generate_cluster_dataset(fx.feeder, fx.tree, 0, fx.shapes, fx.opts);
    ClusterDataset b = generate_cluster_dataset(fx.feeder, fx.tree, 0, fx.shapes, serial);
    REQUIRE(a.inputs.rows() == b.inputs.rows());
    CHECK((a.inputs - b.inputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.outputs - b.outputs).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.train_rows == b.train_rows);
}

TEST_CASE("missing shape reference fails loudly") {
    SynthFixture fx(20);
    std::map<std::string, LoadShape> empty;
    CHECK_THROWS_WITH_AS(generate_samples(fx.feeder, empty, fx.opts),
                         doctest::Contains("missing shape"), Error);
}

TEST_CASE("manifest records the filter decision and seeds") {
    SynthFixture fx(30);
    SampleBank bank = generate_samples(fx.feeder, fx.shapes, fx.opts);
    std::string manifest = synth_manifest(fx.feeder, fx.tree, bank, fx.opts);
    CHECK(manifest.find("median_window 3") != std::string::npos);
    CHECK(manifest.find("median_applied_to all_columns") != std::string::npos);
    CHECK(manifest.find("split_seed") != std::string::npos);
    CHECK(manifest.find("feeder_hash") != std::string::npos);
}
