#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "ntc/infostats.hpp"

using namespace ntc;

namespace {

// Direct plug-in MI: sum p(a,b) log2(p(a,b) / (p(a) p(b))).
double mi_oracle(const std::vector<std::vector<double>>& counts) {
    double n = 0.0;
    std::vector<double> ra(counts.size(), 0.0), cb(counts[0].size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            n += counts[i][j];
            ra[i] += counts[i][j];
            cb[j] += counts[i][j];
        }
    }
    double mi = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            if (counts[i][j] == 0) continue;
            const double p = counts[i][j] / n;
            mi += p * std::log2(p / ((ra[i] / n) * (cb[j] / n)));
        }
    }
    return mi;
}

// Rank by counting, then Pearson on ranks.
double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double w : v) {
                less += w < v[i] ? 1 : 0;
                equal += w == v[i] ? 1 : 0;
            }
            r[i] = less + (equal + 1) / 2;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i] / n;
        my += ry[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

JointCounts joint_of(const std::vector<std::vector<double>>& counts) {
    JointCounts j(counts.size(), counts[0].size());
    for (std::size_t r = 0; r < counts.size(); ++r) {
        for (std::size_t c = 0; c < counts[r].size(); ++c) j.add(r, c, static_cast<std::size_t>(counts[r][c]));
    }
    return j;
}

}  // namespace

TEST_CASE("entropy examples") {
    const std::size_t u4[] = {1, 1, 1, 1};
    const std::size_t one[] = {5};
    const std::size_t skew[] = {3, 1};
    CHECK(entropy(u4) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(entropy(one) == 0.0);
    CHECK(entropy(skew) == doctest::Approx(0.8112781244591328).epsilon(1e-14));
    const std::size_t zeros[] = {0, 0};
    CHECK_THROWS_AS(entropy(zeros), std::invalid_argument);
    const std::size_t values[] = {4, 4, 9, 9};
    CHECK(entropy_of(values) == doctest::Approx(1.0));
}

TEST_CASE("uniform entropy is log2 k") {
    for (std::size_t k = 1; k <= 1024; ++k) {
        std::vector<std::size_t> counts(k, 3);
        CHECK(std::abs(entropy(counts) - std::log2(static_cast<double>(k))) < 1e-12);
    }
}

TEST_CASE("mutual information examples") {
    for (std::size_t k : {1u, 2u, 5u, 16u}) {
        JointCounts j(k, k);
        for (std::size_t i = 0; i < k; ++i) j.add(i, i, 2);
        CHECK(mutual_information(j) == doctest::Approx(std::log2(static_cast<double>(k))));
    }
    // Outer product of marginals (2,3) x (1,4).
    CHECK(std::abs(mutual_information(joint_of({{2, 8}, {3, 12}}))) < 1e-12);
    CHECK(mutual_information(joint_of({{2, 1}, {1, 2}})) ==
          doctest::Approx(0.0817041659455103).epsilon(1e-12));
    CHECK_THROWS_AS(mutual_information(JointCounts(2, 2)), std::invalid_argument);
}

TEST_CASE("from_pairs") {
    const std::size_t a[] = {0, 1, 1, 2};
    const std::size_t b[] = {1, 0, 0, 1};
    const auto j = JointCounts::from_pairs(a, b);
    CHECK(j.rows() == 3);
    CHECK(j.cols() == 2);
    CHECK(j(1, 0) == 2);
    CHECK(j.total() == 4);
    CHECK(j.row_marginal() == std::vector<std::size_t>{1, 2, 1});
    const std::size_t short_b[] = {0};
    CHECK_THROWS(JointCounts::from_pairs(a, short_b));
}

TEST_CASE("exhaustive 3x3 joints match the direct oracle") {
    std::vector<std::vector<double>> c(3, std::vector<double>(3));
    std::size_t checked = 0;
    for (int code = 1; code < 262144; ++code) {  // 4^9 assignments of counts 0..3
        int v = code;
        for (auto& row : c) {
            for (auto& x : row) {
                x = v % 4;
                v /= 4;
            }
        }
        const double got = mutual_information(joint_of(c));
        const double want = mi_oracle(c);
        if (std::abs(got - want) >= 1e-10) {
            FAIL("MI mismatch at code " << code << ": " << got << " vs " << want);
        }
        ++checked;
    }
    CHECK(checked == 262143);
}

TEST_CASE("MI is bounded by the marginal entropies") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> cell(0, 6);
    for (int trial = 0; trial < 500; ++trial) {
        JointCounts j(4, 4);
        for (std::size_t r = 0; r < 4; ++r) {
            for (std::size_t c = 0; c < 4; ++c) j.add(r, c, static_cast<std::size_t>(cell(rng)));
        }
        if (j.total() == 0) continue;
        const double mi = mutual_information(j);
        CHECK(mi >= 0.0);
        CHECK(mi <= std::min(entropy(j.row_marginal()), entropy(j.col_marginal())) + 1e-9);
    }
}

TEST_CASE("spearman") {
    const std::vector<double> a{1, 2, 3}, b{10, 20, 30}, c{3, 2, 1};
    CHECK(*spearman(a, b) == doctest::Approx(1.0));
    CHECK(*spearman(a, c) == doctest::Approx(-1.0));
    const std::vector<double> x{1, 2, 2, 3}, y{1, 2, 3, 3};
    CHECK(*spearman(x, y) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(*spearman(x, y) == doctest::Approx(spearman_oracle(x, y)).epsilon(1e-12));
    const std::vector<double> flat{4, 4, 4};
    CHECK_FALSE(spearman(flat, a).has_value());
    CHECK_THROWS(spearman(std::vector<double>{1}, std::vector<double>{1}));
    CHECK_THROWS(spearman(a, x));
    CHECK(average_ranks(x) == std::vector<double>{1, 2.5, 2.5, 4});
}

TEST_CASE("spearman agrees with a counting oracle on random tied data") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> v(0, 4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> x(12), y(12);
        for (auto& e : x) e = v(rng);
        for (auto& e : y) e = v(rng);
        const auto got = spearman(x, y);
        if (!got) continue;
        CHECK(*got == doctest::Approx(spearman_oracle(x, y)).epsilon(1e-12));
        CHECK(*spearman(x, x) == doctest::Approx(1.0));
    }
}

TEST_CASE("levenshtein") {
    using M = std::vector<std::size_t>;
    CHECK(levenshtein(M{0, 1}, M{0, 1}) == 0);
    CHECK(levenshtein(M{0, 9, 7}, M{0, 7}) == 1);  // "a!x" vs "ax"
    CHECK(levenshtein(M{0, 1}, M{1, 0}) == 2);
    CHECK(levenshtein(M{}, M{3, 3}) == 2);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> len(0, 6), sym(0, 2);
    auto draw = [&] {
        M m(len(rng));
        for (auto& s : m) s = sym(rng);
        return m;
    };
    for (int trial = 0; trial < 500; ++trial) {
        const auto a = draw(), b = draw(), c = draw();
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
    }
}

TEST_CASE("hamming") {
    using T = std::vector<std::size_t>;
    CHECK(hamming(T{1, 2}, T{1, 2}) == 0);
    CHECK(hamming(T{1, 2}, T{1, 3}) == 1);
    CHECK(hamming(T{1, 2}, T{0, 3}) == 2);
    CHECK_THROWS_AS(hamming(T{1}, T{1, 2}), std::invalid_argument);
}
