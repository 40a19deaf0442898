#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "kosmap/error.hpp"
#include "kosmap/retrieval.hpp"
#include "kosmap/taxonomy_io.hpp"
#include "support/oracles.hpp"

using namespace kosmap;
using kosmap::testing::fixture_path;

namespace {

struct Fixture {
    KosGraph graph = parse_canonical(read_file(fixture_path("registry/schemes/research_areas.json")));
    LocalTrigramProvider provider;
    TopicIndex index = build_index(graph, provider);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

ErrorCode error_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

std::vector<std::string> ids(const std::vector<RetrievalCandidate>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.topic_id);
    return out;
}

}  // namespace

TEST_CASE("embedding text joins label, alternates and definition") {
    TopicNode n;
    n.pref_label = "Label";
    n.alt_labels = {"A1", "A2"};
    n.definition = "Def.";
    CHECK(topic_embedding_text(n) == "Label; A1, A2; Def.");
    n.alt_labels.clear();
    CHECK(topic_embedding_text(n) == "Label; Def.");
    n.definition.clear();
    CHECK(topic_embedding_text(n) == "Label");
}

TEST_CASE("index covers every topic") {
    const auto& f = fixture();
    CHECK(f.index.size() == 30);
    CHECK(f.index.dim() == 256);
    CHECK(f.index.scheme_id() == "research_areas");
    CHECK(f.index.at("t_waste") == f.provider.embed(topic_embedding_text(f.graph.at("t_waste"))));
}

TEST_CASE("tau = 0 returns the deterministic top-k by cosine") {
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    RetrievalParams p;
    p.k = 10;
    const auto got = initial_search(f.index, q, p);
    std::vector<std::pair<double, std::string>> all;
    for (const auto& [id, v] : f.index.entries()) all.push_back({-kosmap::testing::dot(q, v), id});
    std::sort(all.begin(), all.end());
    REQUIRE(got.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(got[i].topic_id == all[i].second);
        CHECK(got[i].base_sim == doctest::Approx(-all[i].first).epsilon(1e-12));
        CHECK(got[i].final_score == got[i].base_sim);
    }
    CHECK(ids(got) == std::vector<std::string>{"t_waste", "t_poly_degradation", "t_reverse_logistics",
                                               "t_biodeg_packaging", "sf_polymers", "sf_logistics", "t_circular",
                                               "t_ir", "sf_genetics", "t_implants"});
}

TEST_CASE("restriction and exclusion") {
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    RetrievalParams p;
    p.restrict_to = std::set<std::string, std::less<>>{"t_baroque", "t_waste", "sf_music"};
    p.exclude = {"t_waste"};
    CHECK(ids(initial_search(f.index, q, p)) == std::vector<std::string>{"t_baroque", "sf_music"});
    p.restrict_to = std::set<std::string, std::less<>>{"nope"};
    CHECK(error_of([&] { initial_search(f.index, q, p); }) == ErrorCode::UnknownRestrictedTopic);
}

TEST_CASE("sampling is seeded and draws without replacement") {
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    RetrievalParams p;
    p.k = 10;
    p.tau = 1.0;
    p.seed = 42;
    const auto a = initial_search(f.index, q, p);
    const auto b = initial_search(f.index, q, p);
    CHECK(ids(a) == ids(b));
    const auto got = ids(a);
    CHECK(std::set<std::string>(got.begin(), got.end()).size() == 10);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].base_sim >= a[i].base_sim);
    p.k = 100;
    CHECK(initial_search(f.index, q, p).size() == 30);
}

TEST_CASE("higher temperature yields more distinct topics across seeds") {
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    auto distinct = [&](double tau) {
        std::set<std::string> seen;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            RetrievalParams p;
            p.k = 5;
            p.tau = tau;
            p.seed = seed;
            for (const auto& c : initial_search(f.index, q, p)) seen.insert(c.topic_id);
        }
        return seen.size();
    };
    CHECK(distinct(5.0) > distinct(0.05));
}

TEST_CASE("tiny temperature degrades to the best remaining candidate") {
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    RetrievalParams p;
    p.k = 4;
    p.tau = 1e-300;
    RetrievalParams det;
    det.k = 4;
    CHECK(ids(initial_search(f.index, q, p)) == ids(initial_search(f.index, q, det)));
}

TEST_CASE("rerank matches the frozen oracle ranking on the fixture") {
    // tests/oracles/trigram_oracle.py, all topics scored, default parameters.
    const std::vector<std::pair<std::string, double>> expected{
        {"t_waste", 0.372039},       {"t_poly_degradation", 0.363410}, {"t_biodeg_packaging", 0.331906},
        {"t_reverse_logistics", 0.307015}, {"sf_polymers", 0.204665}, {"sf_logistics", 0.154943},
        {"t_ir", 0.150530},          {"t_circular", 0.137314},         {"t_implants", 0.132073},
        {"sf_genetics", 0.113030}};
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    RetrievalParams p;
    p.k = 30;
    const auto ranked = rerank(f.graph, f.index, q, initial_search(f.index, q, p), RerankParams{});
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CHECK(ranked[i].topic_id == expected[i].first);
        CHECK(ranked[i].final_score == doctest::Approx(expected[i].second).epsilon(1e-6));
    }
}

TEST_CASE("rerank equals the brute-force formula on random polyhierarchies") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> mdist(1, 5);
    for (int trial = 0; trial < 60; ++trial) {
        const auto inst = kosmap::testing::random_polyhierarchy(rng, 50);
        const auto q = kosmap::testing::random_unit(rng, 16);
        RerankParams rp{unit(rng), 0.05 + 0.95 * unit(rng), unit(rng), mdist(rng)};
        RetrievalParams p;
        p.k = inst.index.size();
        const auto ranked = rerank(inst.graph, inst.index, q, initial_search(inst.index, q, p), rp);
        std::vector<kosmap::testing::OracleScore> oracle;
        for (const auto& [id, n] : inst.graph.nodes())
            oracle.push_back(kosmap::testing::brute_force_score(inst.graph, inst.index, q, id, rp));
        std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
            return ranks_before(a.total, a.id, "rand", b.total, b.id, "rand");
        });
        REQUIRE(ranked.size() == oracle.size());
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            CHECK(ranked[i].topic_id == oracle[i].id);
            CHECK(std::abs(ranked[i].final_score - oracle[i].total) <= 1e-9);
            CHECK(std::abs(ranked[i].ancestor_bonus - oracle[i].ancestor) <= 1e-9);
            CHECK(std::abs(ranked[i].sibling_bonus - oracle[i].sibling) <= 1e-9);
        }
    }
}

TEST_CASE("alpha = gamma = 0 keeps the cosine order") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto inst = kosmap::testing::random_polyhierarchy(rng, 50);
        const auto q = kosmap::testing::random_unit(rng, 16);
        RetrievalParams p;
        p.k = inst.index.size();
        const auto base = initial_search(inst.index, q, p);
        const auto ranked = rerank(inst.graph, inst.index, q, base, RerankParams{0.0, 0.5, 0.0, 3});
        CHECK(ids(ranked) == ids(base));
        for (const auto& c : ranked) CHECK(c.final_score == c.base_sim);
    }
}

TEST_CASE("score breakdown reproduces the bonuses") {
    const auto& f = fixture();
    const auto q = f.provider.embed("plastic recycling");
    RetrievalParams p;
    p.k = 30;
    const auto ranked = rerank(f.graph, f.index, q, initial_search(f.index, q, p), RerankParams{});
    const auto it = std::find_if(ranked.begin(), ranked.end(),
                                 [](const auto& c) { return c.topic_id == "t_biodeg_packaging"; });
    REQUIRE(it != ranked.end());
    const auto b = score_breakdown(*it);
    REQUIRE(b.ancestors.size() == 4);
    double anc = 0, sib = 0;
    for (const auto& r : b.ancestors) {
        CHECK(r.weight == doctest::Approx(std::pow(0.5, r.distance)));
        anc += r.contribution;
    }
    for (const auto& r : b.siblings) sib += r.contribution;
    CHECK(b.siblings.size() <= 3);
    CHECK(anc == doctest::Approx(it->ancestor_bonus).epsilon(1e-12));
    CHECK(sib == doctest::Approx(it->sibling_bonus).epsilon(1e-12));
    CHECK(b.final_score == doctest::Approx(b.base_sim + anc + sib).epsilon(1e-12));
}

TEST_CASE("negative sibling similarities are dropped from the mean") {
    TaxonomyDraft d;
    d.scheme = {"s", "S", SchemeKind::MultiField, {}};
    for (const char* id : {"p", "a", "b", "c"}) {
        TopicNode n;
        n.id = id;
        n.pref_label = id;
        if (std::string(id) != "p") n.broader = {"p"};
        d.topics.push_back(n);
    }
    const KosGraph g = KosGraph::build(d);
    TopicIndex::EntryMap e;
    e.emplace("p", EmbeddingVector::normalized({0, 0, 1}));
    e.emplace("a", EmbeddingVector::normalized({1, 0, 0}));
    e.emplace("b", EmbeddingVector::normalized({0.6, 0.8, 0}));
    e.emplace("c", EmbeddingVector::normalized({-1, 0, 0}));
    const TopicIndex idx("s", 3, "t", e);
    const auto q = EmbeddingVector::normalized({1, 0, 0});
    RetrievalCandidate c;
    c.topic_id = "a";
    const auto out = rerank(g, idx, q, {c}, RerankParams{0.0, 0.5, 1.0, 3});
    REQUIRE(out[0].sibling_top.size() == 1);
    CHECK(out[0].sibling_top[0].id == "b");
    CHECK(out[0].sibling_bonus == doctest::Approx(0.6));
}

TEST_CASE("tie-break is topic id then scheme id") {
    CHECK(ranks_before(0.5, "a", "x", 0.4, "a", "x"));
    CHECK(ranks_before(0.5, "a", "x", 0.5, "b", "a"));
    CHECK(ranks_before(0.5, "a", "x", 0.5, "a", "y"));
    CHECK(!ranks_before(0.5, "a", "x", 0.5, "a", "x"));
}

TEST_CASE("index snapshot round trip preserves every bit") {
    const auto& f = fixture();
    const std::string text = serialize_index(f.index);
    const TopicIndex back = load_index(text, f.provider.fingerprint());
    CHECK(back == f.index);
    CHECK(serialize_index(back) == text);
    CHECK(error_of([&] { load_index(text, "other-provider"); }) == ErrorCode::FingerprintMismatch);
}

TEST_CASE("parameter validation") {
    CHECK(error_of([] { RerankParams{0.3, 0.0, 0.1, 3}.validate(); }) == ErrorCode::InvalidConfig);
    CHECK(error_of([] { RerankParams{-1, 0.5, 0.1, 3}.validate(); }) == ErrorCode::InvalidConfig);
    CHECK(error_of([] { RerankParams{0.3, 0.5, 0.1, 0}.validate(); }) == ErrorCode::InvalidConfig);
    RetrievalParams p;
    p.tau = -1;
    CHECK(error_of([&] { p.validate(); }) == ErrorCode::InvalidConfig);
    p.tau = 0;
    p.k = 0;
    CHECK(error_of([&] { p.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("empty index") {
    const TopicIndex empty("s", 4, "t", {});
    RetrievalParams p;
    CHECK(error_of([&] { initial_search(empty, EmbeddingVector::normalized({1, 0, 0, 0}), p); }) ==
          ErrorCode::EmptyIndex);
}
