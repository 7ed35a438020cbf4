#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "ntc/harness.hpp"

using namespace ntc;
namespace fs = std::filesystem;

namespace {

RunConfig quick(std::vector<Family> protocols, std::vector<Metric> metrics, std::size_t seeds = 2) {
    RunConfig c;
    c.protocols = std::move(protocols);
    c.metrics = std::move(metrics);
    c.n_colours = 4;
    c.n_shapes = 4;
    c.seeds = default_seeds(seeds);
    c.tre.epochs = 20;
    c.receiver.embed_dim = 4;
    c.receiver.recurrent_hidden = 4;
    c.receiver.head_hidden = 4;
    c.receiver.max_epochs = 3;
    c.threads = 2;
    return c;
}

std::vector<Metric> closed_form() {
    return {Metric::topsim, Metric::posdis, Metric::bosdis, Metric::context_independence,
            Metric::conflict_count};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t occurrences(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "ntc_harness_test";
    fs::create_directories(dir);
    return dir / name;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(NTC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("csv format") {
    ScoreTable t;
    t.rows.push_back({Family::tc, Metric::topsim, std::nullopt, 0, 1.0, Orientation::higher, ""});
    t.rows.push_back({Family::holistic, Metric::tre, Composition::linear, 1, 4.256789123456, Orientation::lower, ""});
    t.rows.push_back({Family::negation, Metric::conflict_count, std::nullopt, 3, std::nullopt, Orientation::lower, ""});
    const auto csv = lines(render_csv(t));
    REQUIRE(csv.size() == 4);
    CHECK(csv[0] == "protocol,metric,composition,seed,value,orientation,defined");
    CHECK(csv[1] == "tc,topsim,,0,1,higher,true");
    CHECK(csv[2] == "holistic,tre,linear,1,4.25678912,lower,true");
    CHECK(csv[3] == "negation,conflict_count,,3,,lower,false");
    CHECK_THROWS(emit_csv(ScoreTable{}, scratch("empty.csv").string()));
}

TEST_CASE("run matrix shape and order") {
    auto c = quick({Family::negation, Family::tc, Family::context_sensitive}, closed_form(), 3);
    const auto t = run_matrix(c);
    CHECK(t.rows.size() == 3 * 5 * 3);
    for (std::size_t i = 1; i < t.rows.size(); ++i) {
        const auto& a = t.rows[i - 1];
        const auto& b = t.rows[i];
        CHECK(std::tie(a.protocol, a.metric, a.seed) < std::tie(b.protocol, b.metric, b.seed));
    }
    CHECK(t.rows.front().protocol == Family::tc);
    for (const auto& r : t.rows) {
        CHECK(r.error.empty());
        CHECK(r.orientation == orientation_of(r.metric));
        if (r.metric == Metric::conflict_count && r.protocol != Family::tc) CHECK_FALSE(r.defined());
        if (r.protocol == Family::tc && r.metric == Metric::topsim) CHECK(*r.value == doctest::Approx(1.0));
    }
    bool negation_note = false;
    for (const auto& n : t.notes) negation_note = negation_note || n.find("negation") != std::string::npos;
    CHECK(negation_note);
}

TEST_CASE("tre rows per composition and ablation") {
    auto c = quick({Family::tc, Family::holistic}, {Metric::tre}, 2);
    c.compositions = {Composition::nonlinear, Composition::additive};
    const auto t = run_matrix(c);
    CHECK(t.rows.size() == 2 * 2 * 2);
    CHECK(t.rows[0].composition == Composition::additive);
    for (const auto& r : t.rows) CHECK(r.defined());

    c.metrics = closed_form();
    const auto a = run_ablation(c);
    CHECK(a.rows.size() == 8);
    for (const auto& r : a.rows) CHECK(r.metric == Metric::tre);
}

TEST_CASE("generalisation cells") {
    auto c = quick({Family::tc}, {Metric::generalisation}, 1);
    const auto t = run_matrix(c);
    REQUIRE(t.rows.size() == 1);
    REQUIRE(t.rows[0].defined());
    CHECK((*t.rows[0].value >= 0.0 && *t.rows[0].value <= 1.0));
}

TEST_CASE("runs are deterministic across thread counts") {
    auto c = quick({Family::tc, Family::random, Family::diagonal},
                   {Metric::topsim, Metric::tre, Metric::generalisation}, 2);
    c.threads = 1;
    const auto one = render_csv(run_matrix(c));
    c.threads = 4;
    CHECK(render_csv(run_matrix(c)) == one);
}

TEST_CASE("score_cell") {
    const auto c = quick({Family::tc}, {Metric::posdis});
    const auto p = generate(Family::tc, space_for_family(Family::tc, 4, 4), 0);
    CHECK(*score_cell(p, Metric::posdis, std::nullopt, 0, c).value == doctest::Approx(1.0));
    CHECK(score_cell(p, Metric::tre, Composition::linear, 0, c).defined());
}

TEST_CASE("config parsing") {
    const auto j = nlohmann::json::parse(R"({
        "protocols": ["tc", "negation"], "metrics": ["tre"], "compositions": ["additive"],
        "colours": 6, "shapes": 3, "seeds": 2, "out": "x.csv", "plot": "x.svg", "threads": 3,
        "tre": {"epochs": 7, "learning_rate": 0.5}, "receiver": {"max_epochs": 9}
    })");
    const auto c = parse_run_config(j);
    CHECK(c.protocols == std::vector<Family>{Family::tc, Family::negation});
    CHECK(c.metrics == std::vector<Metric>{Metric::tre});
    CHECK(c.compositions == std::vector<Composition>{Composition::additive});
    CHECK(c.n_colours == 6);
    CHECK(c.n_shapes == 3);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1});
    CHECK(c.out == "x.csv");
    CHECK(c.plot == "x.svg");
    CHECK(c.threads == 3);
    CHECK(c.tre.epochs == 7);
    CHECK(c.tre.learning_rate == 0.5);
    CHECK(c.receiver.max_epochs == 9);
    CHECK(parse_run_config(nlohmann::json::parse(R"({"seeds": [4, 9]})")).seeds ==
          std::vector<std::uint64_t>{4, 9});

    for (const char* bad : {R"({"protocol": ["tc"]})", R"({"protocols": ["nosuch"]})", R"({"protocols": "tc"})",
                            R"({"tre": {"epoch": 3}})", R"({"receiver": {"lr": 1}})", R"({"colours": "many"})",
                            R"([1, 2])"}) {
        INFO(bad);
        CHECK_THROWS_AS(parse_run_config(nlohmann::json::parse(bad)), ConfigError);
    }
}

TEST_CASE("validate") {
    RunConfig c;
    CHECK_NOTHROW(validate(c));
    c.protocols.clear();
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.n_colours = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.compositions.clear();
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.metrics = {Metric::topsim};
    CHECK_NOTHROW(validate(c));
    c = {};
    c.seeds.clear();
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("svg plot") {
    auto c = quick({Family::tc, Family::negation}, {Metric::topsim, Metric::conflict_count}, 2);
    const auto t = run_matrix(c);
    const auto svg = render_svg(t, PlotLayout::by_metric);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(occurrences(svg, "<g>") == 2);
    CHECK(svg.find("-conflict_count") != std::string::npos);
    CHECK(occurrences(svg, "n/a") == 1);

    c.metrics = {Metric::tre};
    c.compositions = {Composition::additive, Composition::linear};
    const auto abl = render_svg(run_matrix(c), PlotLayout::by_composition);
    CHECK(occurrences(abl, "<g>") == 2);
    CHECK(abl.find("-tre (additive)") != std::string::npos);
    CHECK_THROWS(render_svg(ScoreTable{}, PlotLayout::by_metric));
}

TEST_CASE("output files") {
    auto c = quick({Family::negation}, {Metric::conflict_count}, 1);
    const auto t = run_matrix(c);
    const auto csv = scratch("out.csv"), notes = scratch("out.notes.txt"), svg = scratch("out.svg");
    emit_csv(t, csv.string());
    emit_notes(t, notes.string());
    emit_plot(t, svg.string(), PlotLayout::by_metric);
    CHECK(slurp(csv) == render_csv(t));
    CHECK(slurp(notes).find("negation") != std::string::npos);
    CHECK(slurp(svg).find("</svg>") != std::string::npos);
}

TEST_CASE("command line") {
    const auto out = scratch("cli.csv");
    fs::remove(out);
    REQUIRE(cli("run --protocols tc --metrics topsim --seeds 1 --colours 5 --shapes 5 --out " + out.string()) == 0);
    const auto csv = lines(slurp(out));
    REQUIRE(csv.size() == 2);
    CHECK(csv[1] == "tc,topsim,,0,1,higher,true");
    CHECK(fs::exists(scratch("cli.notes.txt")));

    CHECK(cli("run --protocols nosuch --out " + out.string()) == 1);
    CHECK(cli("run --metrics tre --compositions cubic --out " + out.string()) == 1);
    CHECK(cli("run --colours 0 --out " + out.string()) == 1);
    CHECK(cli("run --bogus-flag") == 1);
    CHECK(cli("") == 1);

    const auto cfg = scratch("cfg.json");
    std::ofstream(cfg) << R"({"protocols": ["tc"], "metrics": ["posdis"], "seeds": 1, "colours": 3, "shapes": 3})";
    CHECK(cli("run --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(lines(slurp(out)).at(1) == "tc,posdis,,0,1,higher,true");
    std::ofstream(cfg) << "{not json";
    CHECK(cli("run --config " + cfg.string() + " --out " + out.string()) == 1);
    CHECK(cli("run --config " + scratch("missing.json").string()) == 1);

    const auto abl = scratch("abl.csv");
    CHECK(cli("tre-ablation --protocols tc --seeds 1 --colours 3 --shapes 3 --out " + abl.string()) == 0);
    CHECK(lines(slurp(abl)).size() == 4);

    const auto dump = scratch("tc.json");
    CHECK(cli("dump-protocol tc --colours 3 --shapes 3 --out " + dump.string()) == 0);
    const auto j = nlohmann::json::parse(slurp(dump));
    CHECK(j["entries"].size() == 9);
    CHECK(cli("dump-protocol nosuch") == 1);

    CHECK(cli("grad-check --seeds 2") == 0);
    CHECK(cli("run --protocols tc --metrics topsim --seeds 1 --out /nonexistent/dir/x.csv") == 2);
}
