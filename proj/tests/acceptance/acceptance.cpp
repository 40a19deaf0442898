// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "kosmap/error.hpp"
#include "kosmap/service.hpp"
#include "kosmap/taxonomy_io.hpp"
#include "support/oracles.hpp"
#include "support/process.hpp"
#include "support/sessions.hpp"

using namespace kosmap;
using namespace kosmap::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ErrorCode error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected an error");
}

std::vector<std::string> ids(const std::vector<RetrievalCandidate>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.topic_id);
    return out;
}

RerankParams random_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> m(1, 6);
    return RerankParams{unit(rng), 0.01 + 0.99 * unit(rng), unit(rng), m(rng)};
}

Outcome rerank_oracle() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto inst = random_polyhierarchy(rng, 50);
        const auto q = random_unit(rng, 16);
        const auto rp = random_params(rng);
        RetrievalParams p;
        p.k = inst.index.size();
        const auto ranked = rerank(inst.graph, inst.index, q, initial_search(inst.index, q, p), rp);
        std::vector<OracleScore> oracle;
        for (const auto& [id, n] : inst.graph.nodes()) oracle.push_back(brute_force_score(inst.graph, inst.index, q, id, rp));
        std::sort(oracle.begin(), oracle.end(),
                  [](const auto& a, const auto& b) { return ranks_before(a.total, a.id, "rand", b.total, b.id, "rand"); });
        if (ranked.size() != oracle.size()) {
            o.fail(fmt("trial %d: %zu ranked vs %zu topics", trial, ranked.size(), oracle.size()));
            continue;
        }
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (ranked[i].topic_id != oracle[i].id) o.fail(fmt("trial %d: order differs at %zu", trial, i));
            const double diff = std::abs(ranked[i].final_score - oracle[i].total);
            worst = std::max(worst, diff);
            if (diff > 1e-9) o.fail(fmt("trial %d: |diff| %.3g at %s", trial, diff, oracle[i].id.c_str()));
        }
    }
    if (o.pass) o.detail = fmt("200 instances, max |diff| %.3g, order identical", worst);
    return o;
}

Outcome degeneracy() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 200; ++trial) {
        const auto inst = random_polyhierarchy(rng, 50);
        const auto q = random_unit(rng, 16);
        auto rp = random_params(rng);
        rp.alpha = 0.0;
        rp.gamma = 0.0;
        RetrievalParams p;
        p.k = inst.index.size();
        const auto base = initial_search(inst.index, q, p);
        const auto ranked = rerank(inst.graph, inst.index, q, base, rp);
        if (ids(ranked) != ids(base)) o.fail(fmt("trial %d: order differs from cosine order", trial));
        for (const auto& c : ranked)
            if (c.final_score != c.base_sim) o.fail(fmt("trial %d: final != base for %s", trial, c.topic_id.c_str()));
    }
    if (o.pass) o.detail = "200 instances, rerank order == cosine order";
    return o;
}

Outcome temperature() {
    Outcome o;
    const LocalTrigramProvider provider;
    const KosGraph g = parse_canonical(read_file(fixture_path("registry/schemes/research_areas.json")));
    const TopicIndex index = build_index(g, provider);
    const auto q = provider.embed("plastic recycling");

    RetrievalParams p;
    p.k = 5;
    const auto greedy = initial_search(index, q, p);
    std::vector<std::pair<double, std::string>> by_cos;
    for (const auto& [id, v] : index.entries()) by_cos.push_back({-dot(q, v), id});
    std::sort(by_cos.begin(), by_cos.end());
    std::vector<std::string> expected;
    for (std::size_t i = 0; i < p.k; ++i) expected.push_back(by_cos[i].second);
    if (ids(greedy) != expected) o.fail("tau=0 differs from deterministic top-k");
    for (std::uint64_t seed = 1; seed < 20; ++seed) {
        p.seed = seed;
        if (ids(initial_search(index, q, p)) != expected) o.fail("tau=0 depends on the seed");
    }

    // 200 draws per temperature in batches of 10 seeds; distinct topics per batch, averaged.
    auto mean_distinct = [&](double tau) {
        double total = 0;
        for (int batch = 0; batch < 20; ++batch) {
            std::set<std::string> seen;
            for (int i = 0; i < 10; ++i) {
                RetrievalParams sp;
                sp.k = 5;
                sp.tau = tau;
                sp.seed = static_cast<std::uint64_t>(batch * 10 + i);
                for (const auto& c : initial_search(index, q, sp)) seen.insert(c.topic_id);
            }
            total += static_cast<double>(seen.size());
        }
        return total / 20.0;
    };
    const double hot = mean_distinct(5.0);
    const double cold = mean_distinct(0.05);
    if (!(hot > cold)) o.fail(fmt("mean distinct at tau=5 (%.2f) does not exceed tau=0.05 (%.2f)", hot, cold));
    if (o.pass) o.detail = fmt("tau=0 == top-k; mean distinct %.2f (tau=5) > %.2f (tau=0.05)", hot, cold);
    return o;
}

Outcome graph_integrity() {
    Outcome o;
    SkosOptions opts;
    opts.strip_prefix = "http://example.org/kos/";
    auto skos = [&](const char* rel) {
        return [&opts, rel] { parse_skos_ntriples(read_file(fixture_path(rel)), opts); };
    };
    auto canonical = [](const char* rel) { return [rel] { parse_canonical(read_file(fixture_path(rel))); }; };
    const std::vector<std::tuple<std::string, std::function<void()>, ErrorCode>> cases{
        {"skos cycle", skos("invalid/cycle.nt"), ErrorCode::CycleDetected},
        {"skos dangling", skos("invalid/dangling.nt"), ErrorCode::DanglingReference},
        {"skos bidirectional", skos("invalid/bidirectional.nt"), ErrorCode::BidirectionalInconsistency},
        {"canonical cycle", canonical("invalid/cycle.json"), ErrorCode::CycleDetected},
        {"canonical dangling", canonical("invalid/dangling.json"), ErrorCode::DanglingReference},
    };
    for (const auto& [name, fn, code] : cases) {
        try {
            const ErrorCode got = error_of(fn);
            if (got != code)
                o.fail(name + ": got " + std::string(error_code_name(got)) + ", want " +
                       std::string(error_code_name(code)));
        } catch (const std::exception&) {
            o.fail(name + ": accepted");
        }
    }
    const auto draft = read_skos_ntriples(read_file(fixture_path("invalid/bidirectional.nt")), opts);
    if (validate_assertions(draft).count(FindingKind::BidirectionalInconsistency) == 0)
        o.fail("bidirectional fixture yields no finding");

    const KosGraph from_nt = parse_skos_ntriples(read_file(fixture_path("research_areas.nt")), opts);
    const KosGraph g = parse_canonical(read_file(fixture_path("registry/schemes/research_areas.json")));
    if (g.size() != 30) o.fail(fmt("fixture has %zu topics", g.size()));
    if (!validate(g).ok() || !validate(from_nt).ok()) o.fail("valid fixture has findings");
    if (!(from_nt == g)) o.fail("SKOS and canonical fixtures differ");
    const std::string once = serialize_canonical(g);
    const KosGraph back = parse_canonical(once);
    if (!(back == g) || serialize_canonical(back) != once) o.fail("canonical round trip not exact");
    if (o.pass) o.detail = "5 invalid fixtures rejected by name; 30-node fixture clean; round trip exact";
    return o;
}

Outcome scenario() {
    Outcome o;
    const auto reg = fixture_registry();
    const auto& entry = reg->at("research_areas");
    const auto q = reg->provider().embed("plastic recycling");
    const std::vector<std::pair<std::string, std::string>> areas{
        {"sf_polymers", "Polymers and Plastics"},
        {"t_waste", "Waste Management and Disposal"},
        {"t_biodeg_packaging", "Biodegradable Polymers as Biomaterials and Packaging"}};
    for (const auto& [id, label] : areas)
        if (entry.graph.at(id).pref_label != label) o.fail("fixture label mismatch for " + id);
    if (entry.graph.at("t_waste").broader != std::vector<std::string>{"sf_envsci"}) o.fail("t_waste not under sf_envsci");

    std::vector<OracleScore> oracle;
    for (const auto& [id, n] : entry.graph.nodes())
        oracle.push_back(brute_force_score(entry.graph, entry.index, q, id, RerankParams{}));
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
        return ranks_before(a.total, a.id, "research_areas", b.total, b.id, "research_areas");
    });
    std::set<std::string> top10;
    for (std::size_t i = 0; i < 10; ++i) top10.insert(oracle[i].id);
    int in_top10 = 0;
    for (const auto& [id, label] : areas) in_top10 += top10.count(id) ? 1 : 0;
    if (in_top10 != 3) o.fail(fmt("oracle top-10 holds %d of 3 areas", in_top10));

    const auto turn = start_session("plastic recycling", *reg, EngineConfig{}, EngineConfig{}.seed).second;
    int shown = 0;
    for (const auto& [id, label] : areas)
        for (const auto& c : turn.candidates) shown += c.candidate.topic_id == id ? 1 : 0;
    if (shown < 2) o.fail(fmt("first turn shows %d of 3 areas", shown));
    if (o.pass) o.detail = fmt("oracle top-10 holds 3/3 areas; first turn shows %d/3", shown);
    return o;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

Outcome phase_machine() {
    Outcome o;
    const auto reg = fixture_registry();
    const EngineConfig cfg;

    // (a) Confirm on linked topics.
    for (const std::string& id : {std::string("t_ml"), std::string("t_ir")}) {
        const std::string query = id == "t_ml" ? "machine learning" : "information retrieval";
        auto [s, turn] = start_session(query, *reg, cfg, 1);
        const bool shown = std::any_of(turn.candidates.begin(), turn.candidates.end(),
                                       [&](const auto& c) { return c.candidate.topic_id == id; });
        if (!shown) {
            o.fail("(a) " + id + " not in first turn");
            continue;
        }
        auto [s2, t2] = step(s, UserAction::confirm(id), *reg);
        if (s2.phase != Phase::SpecializedDrilldown) o.fail("(a) no drilldown after " + id);
        if (t2.candidates.empty()) o.fail("(a) empty drilldown after " + id);
        for (const auto& c : t2.candidates)
            if (c.candidate.scheme_id != "cs_ontology") o.fail("(a) candidate outside linked scheme");
    }

    // (b) Confirm on an unlinked topic.
    {
        auto [s, turn] = start_session("polymers and plastics", *reg, cfg, 1);
        auto [s2, t2] = step(s, UserAction::confirm("sf_polymers"), *reg);
        const auto below = reg->at("research_areas").graph.descendants("sf_polymers", false);
        if (s2.phase != Phase::BroadExploration || !s2.scope.stringent_root) o.fail("(b) no stringent filtering");
        if (t2.candidates.empty()) o.fail("(b) no candidates under sf_polymers");
        for (const auto& c : t2.candidates) {
            if (!contains(below, c.candidate.topic_id)) o.fail("(b) " + c.candidate.topic_id + " not a strict descendant");
            if (c.candidate.final_score < cfg.stringent_threshold) o.fail("(b) score below threshold");
        }
    }

    // (c) and (d) over random sequences.
    const std::vector<std::string> queries{"plastic recycling", "machine learning", "search engines",
                                           "biodegradable packaging", "genes", "supply chain logistics"};
    std::mt19937_64 rng(1000);
    std::size_t steps = 0, rejects = 0;
    for (int n = 0; n < 1000; ++n) {
        auto s = start_session(queries[n % queries.size()], *reg, cfg, static_cast<std::uint64_t>(n)).first;
        while (s.phase != Phase::Finalized && s.rounds.size() < 20) {
            const Phase before = s.phase;
            const auto action = random_action(s, rng);
            rejects += action.kind == ActionKind::Reject ? 1 : 0;
            auto [next, turn] = step(std::move(s), action, *reg);
            ++steps;
            if (phase_rank(next.phase) < phase_rank(before)) o.fail(fmt("(c) phase regressed in sequence %d", n));
            for (const auto& c : turn.candidates)
                if (next.rejected.count({c.candidate.scheme_id, c.candidate.topic_id}))
                    o.fail("(d) rejected topic " + c.candidate.topic_id + " reappeared");
            s = std::move(next);
        }
    }
    if (o.pass) o.detail = fmt("(a)(b) scripted; 1000 sequences, %zu steps, %zu rejects", steps, rejects);
    return o;
}

Outcome determinism() {
    Outcome o;
    const auto reg = fixture_registry();
    std::mt19937_64 rng(7);
    for (int n = 0; n < 50; ++n) {
        auto s = start_session("plastic recycling", *reg, EngineConfig{}, static_cast<std::uint64_t>(n)).first;
        std::vector<UserAction> actions;
        while (s.phase != Phase::Finalized && actions.size() < 10) {
            actions.push_back(random_action(s, rng));
            s = step(std::move(s), actions.back(), *reg).first;
        }
        const auto a = replay("plastic recycling", actions, *reg, EngineConfig{}, static_cast<std::uint64_t>(n));
        const auto b = replay("plastic recycling", actions, *reg, EngineConfig{}, static_cast<std::uint64_t>(n));
        if (session_to_json(a, true).dump() != session_to_json(s, true).dump() ||
            session_to_json(a, true).dump() != session_to_json(b, true).dump())
            o.fail(fmt("session %d not byte-identical", n));
    }

    const fs::path dir = fs::temp_directory_path() / ("kosmap_acceptance_" + new_session_id());
    fs::create_directories(dir);
    const auto clock = [] { return std::string("2026-01-01T00:00:00Z"); };
    std::vector<std::string> sids;
    std::map<std::string, std::string> views, resolutions;
    {
        SessionService svc(reg, EngineConfig{}, dir, clock);
        for (int n = 0; n < 10; ++n) {
            const std::string id = svc.create({{"query", n % 2 ? "machine learning" : "plastic recycling"}, {"seed", n}})
                                       .at("session_id");
            sids.push_back(id);
            for (int i = 0; i < 5; ++i) {
                const auto probe = replay_events(EventLog(dir).read(id), *reg);
                if (probe.phase == Phase::Finalized) break;
                svc.post_step(id, action_to_json(random_action(probe, rng)));
            }
            if (svc.get_session(id).at("phase") != "finalized") svc.finalize(id);
            views[id] = svc.get_session(id).dump();
            resolutions[id] = svc.resolution(id).dump();
        }
    }
    {
        SessionService restarted(reg, EngineConfig{}, dir, clock);
        if (restarted.recover() != sids.size()) o.fail("recover() count differs");
        for (const auto& id : sids) {
            if (restarted.get_session(id).dump() != views[id]) o.fail("get_session differs after restart");
            if (restarted.resolution(id).dump() != resolutions[id]) o.fail("resolution differs after restart");
        }
    }
    fs::remove_all(dir);
    if (o.pass) o.detail = "50 replays byte-identical; 10 sessions identical after restart";
    return o;
}

Outcome embedding() {
    Outcome o;
    const LocalTrigramProvider p;
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> len(1, 60), ch(32, 126);
    std::vector<EmbeddingVector> vecs;
    while (vecs.size() < 1000) {
        std::string s;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) s += static_cast<char>(ch(rng));
        if (s.find_first_not_of(' ') == std::string::npos) continue;
        const auto v = p.embed(s);
        if (!(v == p.embed(s))) o.fail("nondeterministic embedding");
        if (std::abs(v.norm() - 1.0) > 1e-6) o.fail(fmt("norm %.9f", v.norm()));
        vecs.push_back(v);
    }
    double lo = 1, hi = -1;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        const auto& a = vecs[i];
        const auto& b = vecs[(i * 7 + 3) % vecs.size()];
        const double ab = cosine(a, b);
        if (ab != cosine(b, a)) o.fail("cosine not symmetric");
        if (ab < -1.0 || ab > 1.0) o.fail(fmt("cosine %.9f out of bounds", ab));
        lo = std::min(lo, ab);
        hi = std::max(hi, ab);
    }
    if (o.pass) o.detail = fmt("1000 strings; cosine range [%.3f, %.3f]", lo, hi);
    return o;
}

Outcome golden() {
    Outcome o;
    const std::string base = registry_flag() + " --seed 42";
    const auto chat = run_cli("chat " + base, golden_path("chat_input.txt"));
    const auto batch = run_cli("resolve " + base + " --auto-confirm-top --batch " + shell_quote(golden_path("batch_queries.txt")));
    auto compare = [&](const ProcessResult& r, const std::string& name) {
        std::string want;
        try {
            want = read_file(golden_path(name));
        } catch (const Error&) {
            o.fail(name + " missing");
            return;
        }
        if (r.exit_code != 0) o.fail(fmt("%s: exit %d", name.c_str(), r.exit_code));
        if (r.out != want) o.fail(name + " differs from the checked-in golden");
    };
    compare(chat, "chat_transcript.txt");
    compare(batch, "resolve_batch.jsonl");
    if (o.pass) o.detail = "chat transcript and batch resolve match bit for bit";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"rerank-oracle-equivalence", rerank_oracle},
        {"formula-degeneracy", degeneracy},
        {"temperature-contract", temperature},
        {"graph-integrity", graph_integrity},
        {"plastic-recycling-scenario", scenario},
        {"phase-machine", phase_machine},
        {"determinism-and-replay", determinism},
        {"embedding-provider", embedding},
        {"cli-golden-transcripts", golden},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), secs, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
