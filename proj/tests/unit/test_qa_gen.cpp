#include <algorithm>
#include <set>

#include "doctest.h"
#include "kgalign/qa_gen.hpp"

using namespace kgalign;

namespace {

QaTemplate tmpl(const std::string& relation, const std::string& pattern, QaMode mode) {
    QaTemplate t;
    t.id = relation + "/" + to_string(mode);
    t.relation = relation;
    t.pattern = pattern;
    t.mode = mode;
    return t;
}

}  // namespace

TEST_CASE("open question from one triple") {
    const auto kg = load_triples("AlphaCorp\tcontrols\tMyBank\n");
    const auto out = generate_qa(kg, {tmpl("controls", "Who controls {Y}?", QaMode::open)}, QaConfig{});
    REQUIRE(out.size() == 1);
    CHECK(out[0].question == "Who controls MyBank?");
    CHECK(out[0].answer == "AlphaCorp");
    CHECK(out[0].reference_entity == "MyBank");
    CHECK(out[0].positive);

    const auto tails = generate_qa(kg, {tmpl("controls", "What does {x} control?", QaMode::open)}, QaConfig{});
    REQUIRE(tails.size() == 1);
    CHECK(tails[0].answer == "MyBank");
}

TEST_CASE("answer sets above the cap are dropped") {
    std::string text;
    for (int i = 0; i < 21; ++i) text += "P" + std::to_string(i) + "\towns\tBig\n";
    for (int i = 0; i < 20; ++i) text += "P" + std::to_string(i) + "\towns\tSmall\n";
    const auto kg = load_triples(text);
    const auto out = generate_qa(kg, {tmpl("owns", "Who owns {Y}?", QaMode::open)}, QaConfig{});
    REQUIRE(out.size() == 1);
    CHECK(out[0].reference_entity == "Small");
    CHECK(std::count(out[0].answer.begin(), out[0].answer.end(), ',') == 19);
}

TEST_CASE("multi-answer serialization is sorted") {
    CHECK(join_answers({"b", "A", "a"}) == "A, a, b");
}

TEST_CASE("verification negatives are drawn from non-controllers") {
    const auto kg = load_triples("A\tcontrols\tY\nB\tcontrols\tY\nC\towns\tY\nD\tcontrols\tE\n");
    const RelationId r = kg.relations.id("controls");
    for (uint64_t seed = 0; seed < 20; ++seed) {
        QaConfig cfg;
        cfg.seed = seed;
        const auto out = generate_qa(kg, {tmpl("controls", "Does {X} control {Y}?", QaMode::verification)}, cfg);
        for (const auto& ex : out) {
            const EntityId y = kg.entities.id(ex.reference_entity);
            std::set<std::string> controllers;
            for (EntityId h : kg.heads(y, r)) controllers.insert(kg.entities.label(h));
            // brute force: who is named as X
            std::string x = ex.question.substr(5, ex.question.find(" control ") - 5);
            if (ex.positive) {
                CHECK(ex.answer == "True");
                CHECK(controllers.count(x) == 1);
            } else {
                CHECK(ex.answer == "False");
                CHECK(controllers.count(x) == 0);
                CHECK(x != ex.reference_entity);
            }
        }
        // every reference gets one positive and, at rate 1, one negative
        CHECK(std::count_if(out.begin(), out.end(), [](const QaExample& e) { return !e.positive; }) == 2);
    }
}

TEST_CASE("counting") {
    const auto kg = load_triples("A\tcontrol\tY\nB\tcontrol\tY\n");
    const auto out = generate_qa(
        kg, {tmpl("control", "How many companies and/or people control {Y}?", QaMode::counting)}, QaConfig{});
    REQUIRE(out.size() == 1);
    CHECK(out[0].answer == "2");

    const auto z = generate_qa(kg, {tmpl("control", "Is {Y} controlled by {Z} parties?", QaMode::counting)}, QaConfig{});
    REQUIRE(z.size() == 2);
    CHECK(z[0].question == "Is Y controlled by 2 parties?");
    CHECK(z[0].answer == "True");
    CHECK(z[1].answer == "False");
    CHECK_FALSE(z[1].positive);
}

TEST_CASE("template errors") {
    const auto kg = load_triples("A\tcontrols\tB\n");
    CHECK_THROWS_AS(generate_qa(kg, {tmpl("owns", "Who owns {Y}?", QaMode::open)}, QaConfig{}), ConfigError);
    CHECK_THROWS_AS(tmpl("controls", "Does {X} control it?", QaMode::verification).validate(), ConfigError);
    CHECK_THROWS_AS(load_templates("{\"relation\": 1}"), ConfigError);
    CHECK_THROWS_AS(load_templates("[{"), ParseError);
    const auto ts = load_templates(R"([{"relation": "controls", "pattern": "Who controls {Y}?", "mode": "open"}])");
    REQUIRE(ts.size() == 1);
    CHECK(ts[0].id == "controls/open/0");
}

TEST_CASE("split arithmetic, grouping and determinism") {
    std::vector<QaExample> ex;
    for (int i = 0; i < 100; ++i) {
        QaExample e;
        e.question = "q" + std::to_string(i);
        e.answer = "a";
        ex.push_back(e);
    }
    ex.push_back(ex[7]);  // duplicate question
    auto a = ex, b = ex;
    split_dataset(a, 0.1, 3);
    split_dataset(b, 0.1, 3);
    std::set<std::string> test_q;
    for (const auto& e : a)
        if (e.split == "test") test_q.insert(e.question);
    CHECK(test_q.size() == 10);
    CHECK(a.back().split == a[7].split);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].split == b[i].split);

    std::vector<QaExample> one(3, ex[0]);
    CHECK_THROWS_AS(split_dataset(one, 0.1, 1), ContractError);
}

TEST_CASE("JSONL round trip and stats") {
    const auto kg = load_triples("A\tcontrols\tY\nB\tcontrols\tY\nA\tcontrols\tZ\n");
    auto out = generate_qa(kg,
                           {tmpl("controls", "Who controls {Y}?", QaMode::open),
                            tmpl("controls", "Does {X} control {Y}?", QaMode::verification)},
                           QaConfig{});
    split_dataset(out, 0.5, 1);
    const auto back = load_jsonl(to_jsonl(out));
    CHECK(to_jsonl(back) == to_jsonl(out));
    const auto s = compute_stats(kg, back);
    CHECK(s.train + s.test == static_cast<int>(out.size()));
    double words = 0;
    for (const auto& e : out) words += static_cast<double>(split_ws(e.answer).size());
    CHECK(s.awc == words / static_cast<double>(out.size()));
    CHECK_THROWS_AS(load_jsonl("{\"question\": 1}\n"), ParseError);
}

TEST_CASE("synthetic graph without collisions has distinct word sequences") {
    SynthConfig cfg;
    cfg.n_components = 10;
    cfg.collision_pairs = 0;
    cfg.seed = 4;
    const auto g = synth_co_graph(cfg);
    const auto members = collision_members(g.kg);
    CHECK(std::none_of(members.begin(), members.end(), [](bool b) { return b; }));
    CHECK(g.collision_pairs.empty());
}

TEST_CASE("synthetic collision pairs have disjoint controllers") {
    SynthConfig cfg;
    cfg.n_components = 12;
    cfg.collision_pairs = 5;
    cfg.seed = 9;
    const auto g = synth_co_graph(cfg);
    REQUIRE(g.collision_pairs.size() == 5);
    const auto members = collision_members(g.kg);
    CHECK(std::count(members.begin(), members.end(), true) == 10);
    const RelationId control = g.kg.relations.id("control");
    const RelationId own = g.kg.relations.id("own");
    for (const auto& [a, b] : g.collision_pairs) {
        CHECK(a != b);
        CHECK(split_ws(a) == split_ws(b));
        const EntityId ia = g.kg.entities.id(a), ib = g.kg.entities.id(b);
        for (RelationId r : {control, own}) {
            const auto& ha = g.kg.heads(ia, r);
            const auto& hb = g.kg.heads(ib, r);
            for (EntityId h : ha) CHECK(std::find(hb.begin(), hb.end(), h) == hb.end());
        }
        CHECK_FALSE(g.kg.heads(ia, own).empty());
    }
    // same seed, same graph
    CHECK(synth_co_graph(cfg).kg.to_tsv() == g.kg.to_tsv());
}

TEST_CASE("control through controlled companies") {
    // A holds 60% of B; A and B each hold 30% of C; D holds 40% of C
    const std::vector<std::string> labels = {"A", "B", "C", "D"};
    const std::vector<Shareholding> shares = {{"A", "B", 60}, {"A", "C", 30}, {"B", "C", 30}, {"D", "C", 40}};
    const auto pairs = derive_control(labels, shares);
    CHECK(pairs == std::vector<std::pair<int, int>>{{0, 1}, {0, 2}});
}
