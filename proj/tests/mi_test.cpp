#include "doctest.h"

#include <cmath>

#include "gcs/mi.hpp"
#include "gcs/verify.hpp"

using namespace gcs;

namespace {

StatNetParams zero_statnet(std::size_t dz, std::size_t dh, std::size_t hidden = 8) {
    StatNetParams s;
    s.z_dim = dz;
    s.h_dim = dh;
    s.hidden = hidden;
    s.w1 = Matrix(hidden, dz + dh);
    s.b1.assign(hidden, 0.0);
    s.w2.assign(hidden, 0.0);
    s.b2 = 0.0;
    return s;
}

} // namespace

TEST_CASE("zero statistic network gives a zero bound") {
    auto s = zero_statnet(2, 2);
    Matrix z = random_normal_matrix(10, 2, 1);
    Matrix h = random_normal_matrix(10, 2, 2);
    CHECK(dv_lower_bound(s, z, h, random_permutation(10, 3)) == 0.0);
}

TEST_CASE("constant statistic gives a zero bound") {
    auto s = zero_statnet(2, 2);
    s.b2 = 3.7;
    Matrix z = random_normal_matrix(10, 2, 1);
    Matrix h = random_normal_matrix(10, 2, 2);
    CHECK(dv_lower_bound(s, z, h, random_permutation(10, 3)) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bound is invariant to shifting the output bias") {
    StatNetParams s = init_statnet(3, 3, 11, 16);
    Matrix z = random_normal_matrix(50, 3, 12);
    Matrix h = random_normal_matrix(50, 3, 13);
    auto perm = random_permutation(50, 14);
    const double before = dv_lower_bound(s, z, h, perm);
    s.b2 += 123.456;
    const double after = dv_lower_bound(s, z, h, perm);
    CHECK(after == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("identity permutation on identical copies is non-positive") {
    // joint and marginal terms use the same pairs; Jensen makes the bound <= 0
    StatNetParams s = init_statnet(2, 2, 21, 16);
    Matrix z = random_normal_matrix(30, 2, 22);
    std::vector<std::size_t> identity(30);
    std::iota(identity.begin(), identity.end(), 0);
    const double v = dv_lower_bound(s, z, z, identity);
    CHECK(v <= 1e-12);
}

TEST_CASE("log-sum-exp survives statistics up to 700") {
    auto s = zero_statnet(1, 1, 2);
    s.b2 = 700.0;
    Matrix z = random_normal_matrix(5, 1, 31);
    Matrix h = random_normal_matrix(5, 1, 32);
    const double v = dv_lower_bound(s, z, h, random_permutation(5, 33));
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
    s.b2 = -700.0;
    CHECK(std::isfinite(dv_lower_bound(s, z, h, random_permutation(5, 34))));
}

TEST_CASE("dv input validation") {
    StatNetParams s = init_statnet(2, 2, 41);
    Matrix z = random_normal_matrix(1, 2, 42);
    CHECK_THROWS_AS(dv_lower_bound(s, z, z, {0}), DataError); // n < 2
    Matrix z2 = random_normal_matrix(4, 2, 43);
    Matrix h3 = random_normal_matrix(3, 2, 44);
    CHECK_THROWS_AS(dv_lower_bound(s, z2, h3, random_permutation(4, 45)), DataError);
    CHECK_THROWS_AS(dv_lower_bound(s, z2, z2, random_permutation(3, 46)), DataError);
}

TEST_CASE("T == 0 via zero output layer: loss 0, simulator grads 0, statnet grads alive") {
    Graph g = random_connected_graph(12, 8, 51);
    Matrix x = random_normal_matrix(12, 3, 52);
    Matrix h = random_normal_matrix(12, 3, 53);
    GcsParams p = init_params(3, 2, 2, 0.5, 54);
    StatNetParams s = init_statnet(3, 3, 55, 8);
    s.w2.assign(s.hidden, 0.0); // hidden layer alive, output layer zero -> T == 0
    s.b2 = 0.0;

    auto lg = loss_and_grad(p, s, g, x, h, 56);
    CHECK(lg.loss == 0.0);
    CHECK(max_abs(lg.gcs.w_in) == 0.0);
    CHECK(max_abs(lg.gcs.wq[0]) == 0.0);
    CHECK(max_abs(lg.gcs.w_out) == 0.0);
    double stat_grad_mag = 0.0;
    for (double v : lg.stat.w2)
        stat_grad_mag = std::max(stat_grad_mag, std::abs(v));
    CHECK(stat_grad_mag > 0.0);
}

TEST_CASE("loss_value matches loss_and_grad") {
    Graph g = random_connected_graph(10, 6, 61);
    Matrix x = random_normal_matrix(10, 3, 62);
    Matrix h = random_normal_matrix(10, 3, 63);
    GcsParams p = init_params(3, 1, 2, 0.5, 64);
    StatNetParams s = init_statnet(3, 3, 65, 8);
    auto lg = loss_and_grad(p, s, g, x, h, 66);
    CHECK(loss_value(p, s, g, x, h, 66) == lg.loss);
    CHECK(lg.bound == -lg.loss);
}

TEST_CASE("trained bound stays near zero for independent pairs") {
    // true MI = 0; a small statnet at n = 2000 should not fabricate much
    Matrix z = random_normal_matrix(2000, 1, 71);
    Matrix h = random_normal_matrix(2000, 1, 72);
    auto tr = train_statnet(z, h, 150, 3e-3, 73);
    const double bound = evaluate_bound(tr.stat, z, h, 20, 74);
    CHECK(std::abs(bound) < 0.08);
}
