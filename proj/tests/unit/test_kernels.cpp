#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>

#include "hybridroute/kernels.hpp"
#include "hybridroute/policy.hpp"

using namespace hybridroute;
namespace k = hybridroute::kernels;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

struct Fixture {
    std::vector<std::vector<double>> small, large;
    std::vector<k::SamplePair> pairs;
    std::vector<FeatureVector> features;
    std::vector<double> weights;
    std::vector<double> labels;

    Fixture(std::size_t n, std::size_t dim, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(-2.0, 0.5);
        std::uniform_int_distribution<std::size_t> len(1, 12);
        std::uniform_int_distribution<std::uint32_t> idx(0, static_cast<std::uint32_t>(dim - 1));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> s(len(rng)), l(len(rng));
            for (auto& x : s) x = g(rng);
            for (auto& x : l) x = g(rng);
            small.push_back(std::move(s));
            large.push_back(std::move(l));
            std::vector<double> dense(dim, 0.0);
            for (int j = 0; j < 6; ++j) dense[idx(rng)] = g(rng) + 2.0;
            auto fv = FeatureVector::from_dense(dense);
            // Keep it sparse.
            FeatureVector sparse{dim, {}, {}};
            for (std::size_t j = 0; j < fv.index.size(); ++j) {
                if (fv.value[j] != 0.0) {
                    sparse.index.push_back(fv.index[j]);
                    sparse.value.push_back(fv.value[j]);
                }
            }
            features.push_back(std::move(sparse));
            labels.push_back(u(rng));
        }
        for (std::size_t i = 0; i < n; ++i) pairs.push_back({small[i], large[i]});
        weights.resize(dim);
        for (auto& w : weights) w = g(rng) + 2.0;
    }
};

}  // namespace

TEST_CASE("sigmoid stays strictly inside (0, 1)") {
    CHECK(k::sigmoid(0.0) == 0.5);
    CHECK(k::sigmoid(800.0) < 1.0);
    CHECK(k::sigmoid(-800.0) > 0.0);
    CHECK(k::sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(k::sigmoid(2.0) + k::sigmoid(-2.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("serial and OpenMP kernels agree bit for bit") {
    for (int threads : {1, 2, 4, 7}) {
        CAPTURE(threads);
        k::set_threads(threads);
        const Fixture f(333, 97, 11 + static_cast<std::uint64_t>(threads));

        std::vector<double> a(f.pairs.size()), b(f.pairs.size());
        for (double t : {0.0, 0.3, 1.7}) {
            k::serial::transformed_labels(f.pairs, t, a);
            k::omp::transformed_labels(f.pairs, t, b);
            for (std::size_t i = 0; i < a.size(); ++i) CHECK(same_bits(a[i], b[i]));
        }

        std::vector<double> sa(f.features.size()), sb(f.features.size());
        k::serial::scores(f.weights, 0.25, f.features, sa);
        k::omp::scores(f.weights, 0.25, f.features, sb);
        for (std::size_t i = 0; i < sa.size(); ++i) CHECK(same_bits(sa[i], sb[i]));

        std::vector<double> ms, ml;
        for (std::size_t i = 0; i < f.small.size(); ++i) {
            double s = 0, l = 0;
            for (double x : f.small[i]) s += x;
            for (double x : f.large[i]) l += x;
            ms.push_back(s / static_cast<double>(f.small[i].size()));
            ml.push_back(l / static_cast<double>(f.large[i].size()));
        }
        const auto grid = midpoint_thresholds(sa);
        std::vector<k::SweepPoint> pa(grid.size()), pb(grid.size());
        k::serial::routed_quality_sweep(sa, ms, ml, grid, pa);
        k::omp::routed_quality_sweep(sa, ms, ml, grid, pb);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            CHECK(same_bits(pa[g].quality_sum, pb[g].quality_sum));
            CHECK(pa[g].routed_small == pb[g].routed_small);
        }

        std::vector<double> ga, gb;
        double ba = 0.0, bb = 0.0;
        const double la = k::serial::bce_objective(f.weights, 0.25, f.features, f.labels, 1e-3, ga, ba);
        const double lb = k::omp::bce_objective(f.weights, 0.25, f.features, f.labels, 1e-3, gb, bb);
        CHECK(same_bits(la, lb));
        CHECK(same_bits(ba, bb));
        REQUIRE(ga.size() == gb.size());
        for (std::size_t j = 0; j < ga.size(); ++j) CHECK(same_bits(ga[j], gb[j]));
    }
    k::set_threads(0);
}

TEST_CASE("sweep matches a direct count") {
    const std::vector<double> scores{0.2, 0.8, 0.5, 0.5};
    const std::vector<double> ms{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> ml{10.0, 20.0, 30.0, 40.0};
    const std::vector<double> th{0.0, 0.5, 0.79, 1.0};
    std::vector<k::SweepPoint> out(th.size());
    k::serial::routed_quality_sweep(scores, ms, ml, th, out);
    CHECK(out[0].routed_small == 4);
    CHECK(out[0].quality_sum == 10.0);
    // Scores equal to the threshold stay at large.
    CHECK(out[1].routed_small == 1);
    CHECK(out[1].quality_sum == 10.0 + 2.0 + 30.0 + 40.0);
    CHECK(out[2].routed_small == 1);
    CHECK(out[3].routed_small == 0);
    CHECK(out[3].quality_sum == 100.0);
}
