#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "ntc/protocols.hpp"
#include "ntc/receiver.hpp"

using namespace ntc;

namespace {

Protocol make(Family family, std::size_t nc, std::size_t ns, std::uint64_t seed = 0) {
    return generate(family, space_for_family(family, nc, ns), seed);
}

ReceiverConfig small_config() {
    ReceiverConfig c;
    c.embed_dim = 3;
    c.recurrent_hidden = 4;
    c.head_hidden = 5;
    return c;
}

std::set<Message> messages_of(const std::vector<Example>& xs) {
    std::set<Message> out;
    for (const auto& x : xs) out.insert(x.message);
    return out;
}

}  // namespace

TEST_CASE("split sizes") {
    ReceiverConfig c;
    const auto tc = split(make(Family::tc, 25, 25), c);
    CHECK(tc.train.size() == 500);
    CHECK(tc.test.size() == 125);
    CHECK(tc.slot_sizes == std::vector<std::size_t>{25, 25});

    const auto cs = split(make(Family::context_sensitive, 5, 5), c);
    CHECK(cs.train.size() == 60);
    CHECK(cs.test.size() == 15);
    CHECK(cs.slot_sizes == std::vector<std::size_t>{3, 5, 5});

    const auto two = split(make(Family::tc, 2, 1), c);
    CHECK(two.train.size() == 1);
    CHECK(two.test.size() == 1);

    c.split_ratio = 0.99;
    CHECK(split(make(Family::tc, 3, 3), c).test.size() == 1);
    CHECK_THROWS_AS(split(make(Family::tc, 1, 1), c), std::invalid_argument);
}

TEST_CASE("split is a seeded partition") {
    const auto p = make(Family::tc, 6, 6, 2);
    ReceiverConfig c;
    c.seed = 4;
    const auto a = split(p, c);
    const auto b = split(p, c);
    CHECK(messages_of(a.train) == messages_of(b.train));

    const auto train = messages_of(a.train), test = messages_of(a.test);
    CHECK(train.size() + test.size() == p.size());
    for (const auto& m : test) CHECK(train.count(m) == 0);

    for (std::size_t i = 0; i < p.size(); ++i) {
        bool found = false;
        for (const auto* side : {&a.train, &a.test}) {
            for (const auto& x : *side) {
                if (x.message == p.messages()[i]) {
                    found = true;
                    CHECK(x.target == p.tuple(i));
                }
            }
        }
        CHECK(found);
    }
    c.seed = 5;
    CHECK(messages_of(split(p, c).train) != train);
}

TEST_CASE("initialisation") {
    ReceiverConfig c;
    const auto r = Receiver::initialised(50, {25, 25}, c);
    CHECK(r.values().size() == 27800);
    const auto again = Receiver::initialised(50, {25, 25}, c);
    CHECK(r.values() == again.values());
    c.seed = 1;
    CHECK(Receiver::initialised(50, {25, 25}, c).values() != r.values());

    // Recurrent and head weights stay inside their uniform bounds.
    const double bound = 1.0 / std::sqrt(50.0);
    const Eigen::VectorXd rest = r.values().tail(r.values().size() - 50 * 50);
    CHECK(rest.cwiseAbs().maxCoeff() <= bound + 1e-12);

    CHECK_THROWS_AS(Receiver(0, {2}, c), std::invalid_argument);
    CHECK_THROWS_AS(Receiver(3, {}, c), std::invalid_argument);
}

TEST_CASE("loss gradient matches finite differences") {
    const auto c = small_config();
    Receiver r = Receiver::initialised(4, {3, 2}, c);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.5);
    for (Eigen::Index i = 0; i < r.values().size(); ++i) r.values()[i] += n(rng);

    for (const Example& ex : {Example{{0, 3, 1}, {2, 0}}, Example{{2}, {1, 1}}}) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(r.values().size());
        const double base = r.loss(ex, &grad);
        CHECK(base == doctest::Approx(r.loss(ex)));
        constexpr double h = 1e-5;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < r.values().size(); ++i) {
            const double saved = r.values()[i];
            r.values()[i] = saved + h;
            const double up = r.loss(ex);
            r.values()[i] = saved - h;
            const double down = r.loss(ex);
            r.values()[i] = saved;
            const double numeric = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-6}));
        }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("loss and prediction") {
    const auto c = small_config();
    const auto r = Receiver::initialised(4, {3, 2}, c);
    const Example ex{{1, 2}, {0, 1}};
    bool exact = false;
    const double l = r.loss(ex, nullptr, &exact);
    CHECK(l > 0.0);
    const auto pred = r.predict(ex.message);
    REQUIRE(pred.size() == 2);
    CHECK(pred[0] < 3);
    CHECK(pred[1] < 2);
    CHECK(exact == (pred == ex.target));
    CHECK_THROWS_AS(r.predict(Message{4}), std::invalid_argument);
    CHECK_THROWS_AS(r.predict(Message{}), std::invalid_argument);
}

TEST_CASE("receiver memorises a single example") {
    const auto c = small_config();
    Receiver r = Receiver::initialised(4, {3, 2}, c);
    const std::vector<Example> one{{{1, 2}, {2, 0}}};
    const auto log = train_receiver(r, one, c);
    REQUIRE_FALSE(log.empty());
    CHECK(log.back().train_accuracy == 1.0);
    CHECK(r.predict(one[0].message) == one[0].target);
    CHECK(evaluate(r, one).exact == 1.0);
}

TEST_CASE("receiver learns a small compositional protocol") {
    const auto p = make(Family::tc, 5, 5, 1);
    ReceiverConfig c;
    const auto data = split(p, c);
    std::vector<TrainingRecord> log;
    const auto r = train_receiver(data, p.alphabet().size(), c, &log);
    CHECK(log.size() < c.max_epochs);
    CHECK(log.back().train_accuracy == 1.0);
    CHECK(evaluate(r, data.train).exact == 1.0);
    for (std::size_t i = 0; i < log.size(); ++i) CHECK(log[i].epoch == i + 1);

    std::vector<TrainingRecord> log2;
    const auto r2 = train_receiver(data, p.alphabet().size(), c, &log2);
    CHECK(r2.values() == r.values());
    CHECK(log2.size() == log.size());
}

TEST_CASE("predictions are invariant to relabelling with permuted embeddings") {
    const auto p = make(Family::diagonal, 4, 4, 2);
    const auto c = small_config();
    const auto r = Receiver::initialised(p.alphabet().size(), {4, 4}, c);
    std::vector<std::size_t> perm(p.alphabet().size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
    const auto q = p.relabelled(perm);

    Receiver source = r, moved = r;
    for (std::size_t s = 0; s < perm.size(); ++s) moved.embedding(perm[s]) = source.embedding(s);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(moved.predict(q.messages()[i]) == r.predict(p.messages()[i]));
        const Example a{p.messages()[i], p.tuple(i)}, b{q.messages()[i], q.tuple(i)};
        CHECK(moved.loss(b) == doctest::Approx(r.loss(a)).epsilon(1e-12));
    }
}

TEST_CASE("evaluate") {
    const auto c = small_config();
    const auto r = Receiver::initialised(3, {2, 2}, c);
    std::vector<Example> xs;
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) xs.push_back({{a, b + 1}, {a, b}});
    }
    const auto acc = evaluate(r, xs);
    REQUIRE(acc.per_slot.size() == 2);
    double exact = 0;
    for (const auto& x : xs) exact += r.predict(x.message) == x.target;
    CHECK(acc.exact == doctest::Approx(exact / 4));
    for (double s : acc.per_slot) CHECK((s >= 0.0 && s <= 1.0));
    CHECK(acc.exact <= *std::min_element(acc.per_slot.begin(), acc.per_slot.end()) + 1e-12);
    CHECK(evaluate(r, {}).exact == 0.0);
}

TEST_CASE("generalisation runs") {
    const auto p = make(Family::tc, 4, 4, 0);
    ReceiverConfig c = small_config();
    c.max_epochs = 5;
    c.seed = 10;
    const auto runs = generalisation_runs(p, c);
    REQUIRE(runs.size() == kGeneralisationSeeds);
    double mean = 0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        CHECK(runs[k].seed == 10 + k);
        CHECK(runs[k].epochs >= 1);
        CHECK(runs[k].epochs <= 5);
        CHECK((runs[k].test.exact >= 0.0 && runs[k].test.exact <= 1.0));
        CHECK((runs[k].train_accuracy >= 0.0 && runs[k].train_accuracy <= 1.0));
        mean += runs[k].test.exact / runs.size();
    }
    const auto score = generalisation(p, c);
    CHECK(score.metric == Metric::generalisation);
    CHECK(score.orientation == Orientation::higher);
    CHECK(*score.value == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("training log file") {
    const std::vector<TrainingRecord> log{{1, 2.5, 0.25}, {2, 1.0, 1.0}};
    const auto path = std::filesystem::temp_directory_path() / "ntc_receiver_log.csv";
    write_training_log(log, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,train_loss,train_acc");
    std::getline(in, line);
    CHECK(line == "1,2.5,0.25");
    std::filesystem::remove(path);
}
