#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kosmap/taxonomy_io.hpp"
#include "support/process.hpp"

using namespace kosmap;
using namespace kosmap::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("kosmap_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<json> json_lines(const std::string& text) {
    std::vector<json> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

}  // namespace

TEST_CASE("ingest SKOS writes the canonical document") {
    TempDir dir("ingest");
    const auto r = run_cli("ingest --format skos " + shell_quote(fixture_path("research_areas.nt")) +
                           " --strip-prefix http://example.org/kos/ -o " +
                           shell_quote(dir.file("ra.json")));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("ok: 30 topics, 3 roots") != std::string::npos);
    const KosGraph written = parse_canonical(read_file(dir.file("ra.json")));
    const KosGraph fixture = parse_canonical(read_file(fixture_path("registry/schemes/research_areas.json")));
    CHECK(written.size() == fixture.size());
    CHECK(written.roots() == fixture.roots());
}

TEST_CASE("ingest reports integrity findings and writes nothing") {
    TempDir dir("findings");
    for (const char* name : {"cycle.nt", "dangling.nt", "bidirectional.nt"}) {
        const auto out = dir.file("out.json");
        const auto r = run_cli("ingest --format skos " + shell_quote(fixture_path(std::string("invalid/") + name)) +
                               " -o " + shell_quote(out));
        CHECK_MESSAGE(r.exit_code == 2, name << ": " << r.out);
        CHECK(r.out.find("finding: ") != std::string::npos);
        CHECK(!fs::exists(out));
    }
    const auto cyc = run_cli("ingest " + shell_quote(fixture_path("invalid/cycle.json")));
    CHECK(cyc.exit_code == 2);
    CHECK(cyc.out.find("cycle") != std::string::npos);
    const auto bidi = run_cli("ingest --format skos " + shell_quote(fixture_path("invalid/bidirectional.nt")));
    CHECK(bidi.out.find("bidirectional_inconsistency") != std::string::npos);
}

TEST_CASE("ingest parse errors exit 1") {
    const auto r = run_cli("ingest --format skos " + shell_quote(fixture_path("invalid/malformed.nt")));
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("line 2") != std::string::npos);
    CHECK(run_cli("ingest /nonexistent/file.json").exit_code == 1);
    CHECK(run_cli("ingest --format turtle x").exit_code == 1);
}

TEST_CASE("index snapshots are reproducible") {
    TempDir dir("index");
    const auto input = shell_quote(fixture_path("registry/schemes/research_areas.json"));
    const auto a = run_cli("index " + input + " -o " + shell_quote(dir.file("a.idx")));
    const auto b = run_cli("index " + input + " -o " + shell_quote(dir.file("b.idx")));
    CHECK(a.exit_code == 0);
    CHECK(a.out.find("indexed 30 topics, dim 256") != std::string::npos);
    CHECK(b.exit_code == 0);
    CHECK(read_file(dir.file("a.idx")) == read_file(dir.file("b.idx")));
    const auto remote = run_cli("index " + input + " -o " + shell_quote(dir.file("c.idx")) +
                                " --provider remote_http --endpoint http://127.0.0.1:1/embed --model m");
    CHECK(remote.exit_code == 1);
    CHECK(remote.out.find("remote_unavailable") != std::string::npos);
}

TEST_CASE("resolve prints one record per query") {
    const auto r = run_cli("resolve " + registry_flag() + " --tau 0 'plastic recycling'");
    REQUIRE(r.exit_code == 0);
    const auto records = json_lines(r.out);
    REQUIRE(records.size() == 1);
    CHECK(records[0].at("query") == "plastic recycling");
    CHECK(records[0].at("candidates").at(0).at("topic_id") == "t_waste");
    CHECK(records[0].at("candidates").at(0).contains("breakdown"));

    TempDir dir("batch");
    {
        std::FILE* f = std::fopen(dir.file("q.txt").c_str(), "w");
        std::fputs("machine learning\n\n   \nsearch engines\n", f);
        std::fclose(f);
    }
    const auto batch = run_cli("resolve " + registry_flag() + " --auto-confirm-top --batch " + shell_quote(dir.file("q.txt")));
    CHECK(batch.exit_code == 0);
    const auto lines = json_lines(batch.out);
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0].at("entities").size() == 1);
    CHECK(run_cli("resolve " + registry_flag()).exit_code == 1);
    CHECK(run_cli("resolve --data-dir /nonexistent 'x'").exit_code == 1);
}

TEST_CASE("chat finishes on done and on end of input") {
    TempDir dir("chat");
    {
        std::FILE* f = std::fopen(dir.file("script.txt").c_str(), "w");
        std::fputs("plastic recycling\nbogus\nc 1\nd\n", f);
        std::fclose(f);
    }
    const auto r = run_cli("chat " + registry_flag() + " --tau 0", dir.file("script.txt"));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("invalid input") != std::string::npos);
    CHECK(r.out.find("resolved entities:") != std::string::npos);
    CHECK(r.out.find("Waste Management and Disposal") != std::string::npos);

    const auto eof = run_cli("chat " + registry_flag() + " 'plastic recycling'");
    CHECK(eof.exit_code == 0);
    CHECK(eof.out.find("no entities resolved") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(run_cli("").exit_code != 0);
    CHECK(run_cli("frobnicate").exit_code == 1);
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("resolve " + registry_flag() + " --beta 7 x").exit_code == 1);
}
