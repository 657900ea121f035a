#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "attnalign/attn_io.hpp"
#include "attnalign/synth.hpp"
#include "commands.hpp"
#include "helpers.hpp"

using namespace attnalign;
namespace cli = attnalign::cli;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// A corpus of `n` synthetic utterances in dir/corpus.
std::string make_corpus(const testutil::TempDir& dir, std::size_t n, std::uint64_t seed = 1) {
    const std::string corpus = dir / "corpus";
    auto r = run({"synth", "--out", corpus, "--seed", std::to_string(seed), "--count", std::to_string(n)});
    REQUIRE(r.code == cli::kSuccess);
    return corpus;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is deterministic and writes dumps, reference and manifest") {
    testutil::TempDir dir("cli");
    for (const char* sub : {"a", "b"}) {
        auto r = run({"synth", "--seed", "1", "--count", "10", "--out", dir / sub});
        CHECK(r.code == 0);
    }
    for (const char* f : {"reference.tsv", "manifest.jsonl", "synth00000.atnm", "synth00009.atnm"}) {
        const std::string name = f;
        CHECK(slurp(dir / ("a/" + name)) == slurp(dir / ("b/" + name)));
        CHECK_FALSE(slurp(dir / ("a/" + name)).empty());
    }
    std::ifstream manifest(dir / "a/manifest.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(manifest, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.contains("utterance_id"));
        CHECK(j["layer"].get<std::size_t>() < 4);
        CHECK(j["head"].get<std::size_t>() < 8);
        ++n;
    }
    CHECK(n == 10);
}

TEST_CASE("synth with count 0 writes an empty manifest") {
    testutil::TempDir dir("cli");
    auto r = run({"synth", "--count", "0", "--out", dir / "e"});
    CHECK(r.code == 0);
    CHECK(slurp(dir / "e/manifest.jsonl").empty());
}

TEST_CASE("synth rejects an infeasible mix") {
    testutil::TempDir dir("cli");
    auto r = run({"synth", "--out", dir / "x", "--uniform", "40"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("distractor") != std::string::npos);
}

TEST_CASE("align writes one row per word and a summary") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 4);
    auto r = run({"align", corpus, "--criterion", "norm", "--top-k", "10"});
    CHECK(r.code == 0);
    std::istringstream tsv(r.out);
    const auto pred = read_reference_alignments(tsv);
    const auto ref = read_reference_alignments_file(corpus + "/reference.tsv");
    CHECK(pred.size() == 4);
    for (const auto& [utt, segs] : ref) {
        CHECK(pred.at(utt).size() == segs.size());
    }
    CHECK(r.err.find("aligned 4 utterances") != std::string::npos);
}

TEST_CASE("align output does not depend on the number of jobs") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 6);
    auto a = run({"align", corpus, "--jobs", "1"});
    auto b = run({"align", corpus, "--jobs", "4"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("fixed head 0:0 on a one-head dump equals top-1") {
    testutil::TempDir dir("cli");
    auto d = testutil::make_dump({"ab", "c"}, 1, 1, 9, [](auto, auto, auto k, auto t) {
        return t / 3 == k ? 1.0 : 0.05;
    });
    write_dump_file(d, dir / "one.atnm");
    auto fixed = run({"align", dir / "one.atnm", "--fixed-heads", "0:0"});
    auto top = run({"align", dir / "one.atnm", "--top-k", "1"});
    CHECK(fixed.code == 0);
    CHECK(fixed.out == top.out);
    CHECK(run({"align", dir / "one.atnm", "--fixed-heads", "1:0"}).code == cli::kDataError);
    CHECK(run({"align", dir / "one.atnm", "--fixed-heads", "zero"}).code == cli::kUsage);
}

TEST_CASE("align with a missing file fails; keep-going continues") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 2);
    auto r = run({"align", corpus, dir / "missing.atnm"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("missing.atnm") != std::string::npos);
    r = run({"align", corpus, dir / "missing.atnm", "--keep-going"});
    CHECK(r.code == cli::kPartialFailure);
    std::istringstream tsv(r.out);
    CHECK(read_reference_alignments(tsv).size() == 2);
}

TEST_CASE("oracle alignment needs a reference") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 2);
    CHECK(run({"align", corpus, "--oracle"}).code == cli::kUsage);
    auto r = run({"align", corpus, "--oracle", "--reference", corpus + "/reference.tsv"});
    CHECK(r.code == 0);
    CHECK(run({"align", corpus, "--oracle", "--top-k", "3", "--reference", corpus + "/reference.tsv"}).code ==
          cli::kUsage);
}

TEST_CASE("eval of the reference against itself") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 3);
    const auto ref = corpus + "/reference.tsv";
    auto r = run({"eval", "--pred", ref, "--ref", ref, "--out", dir / "eval.csv"});
    CHECK(r.code == 0);
    const auto csv = slurp(dir / "eval.csv");
    CHECK(count_lines(csv) == 7);
    CHECK(csv.rfind("tolerance_ms,precision,recall,f1,tp,hyp_words,ref_words\n", 0) == 0);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    while (std::getline(lines, line)) {
        CHECK(line.find(",1.000000,1.000000,1.000000,") != std::string::npos);
    }
    CHECK(r.out.find("F1@50ms 100.0") != std::string::npos);
    CHECK(r.out.find("F1@100ms 100.0") != std::string::npos);
}

TEST_CASE("eval warns about predictions without a reference; strict makes it fatal") {
    testutil::TempDir dir("cli");
    {
        std::ofstream p(dir / "pred.tsv");
        p << "u1\ta\t0\t0.1\nu2\tb\t0\t0.2\n";
        std::ofstream q(dir / "ref.tsv");
        q << "u1\ta\t0\t0.1\n";
    }
    auto r = run({"eval", "--pred", dir / "pred.tsv", "--ref", dir / "ref.tsv"});
    CHECK(r.code == 0);
    CHECK(r.err.find("u2") != std::string::npos);
    CHECK(r.out.find("20,1.000000,1.000000,1.000000,1,1,1") != std::string::npos);
    r = run({"eval", "--pred", dir / "pred.tsv", "--ref", dir / "ref.tsv", "--strict"});
    CHECK(r.code == cli::kDataError);
}

TEST_CASE("eval reports parse errors as data errors") {
    testutil::TempDir dir("cli");
    {
        std::ofstream p(dir / "bad.tsv");
        p << "u1\ta\t0.5\t0.1\n";
    }
    auto r = run({"eval", "--pred", dir / "bad.tsv", "--ref", dir / "bad.tsv"});
    CHECK(r.code == cli::kDataError);
    CHECK(r.err.find("line 1") != std::string::npos);
}

TEST_CASE("oracle reports a histogram and coverage") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 5);
    auto r = run({"oracle", corpus, "--reference", corpus + "/reference.tsv", "--tolerance-ms", "20", "--out",
                  dir / "oracle.csv", "--histogram", dir / "hist.csv", "--scatter", dir / "scatter.csv"});
    CHECK(r.code == 0);
    CHECK(count_lines(slurp(dir / "oracle.csv")) == 6);
    CHECK(count_lines(slurp(dir / "scatter.csv")) == 1 + 5 * 32);
    CHECK(slurp(dir / "hist.csv").rfind("layer,head,count,fraction\n", 0) == 0);
    CHECK(r.out.find("top-20 oracle heads cover 100.0% of utterances") != std::string::npos);
    CHECK(r.out.find("upper half") != std::string::npos);

    // The planted heads are what the oracle finds.
    std::ifstream manifest(corpus + "/manifest.jsonl");
    std::ifstream table(dir / "oracle.csv");
    std::string m, t;
    std::getline(table, t);
    while (std::getline(manifest, m) && std::getline(table, t)) {
        const auto j = nlohmann::json::parse(m);
        CHECK(t.rfind(j["utterance_id"].get<std::string>() + "," + std::to_string(j["layer"].get<int>()) + "," +
                          std::to_string(j["head"].get<int>()) + ",",
                      0) == 0);
    }
}

TEST_CASE("oracle on single-head dumps gives a one-row histogram") {
    testutil::TempDir dir("cli");
    auto r = run({"synth", "--out", dir / "c", "--count", "3", "--layers", "1", "--heads", "1", "--uniform", "0",
                  "--noise", "0", "--blurry", "0"});
    REQUIRE(r.code == 0);
    r = run({"oracle", dir / "c", "--reference", dir / "c/reference.tsv", "--histogram", dir / "h.csv"});
    CHECK(r.code == 0);
    CHECK(slurp(dir / "h.csv") == "layer,head,count,fraction\n0,0,3,1.000000\n");
}

TEST_CASE("hit rate is monotone and reaches 1 at all heads") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 6);
    auto r = run({"hit-rate", corpus, "--reference", corpus + "/reference.tsv", "--k", "1,2,5,10,all"});
    CHECK(r.code == 0);
    std::istringstream csv(r.out);
    std::string line;
    std::getline(csv, line);
    CHECK(line == "k,f1_50ms,hit_rate");
    double prev = -1.0;
    std::string last;
    while (std::getline(csv, line)) {
        const double rate = std::stod(line.substr(line.rfind(',') + 1));
        CHECK(rate >= prev);
        prev = rate;
        last = line;
    }
    CHECK(last.rfind("all,", 0) == 0);
    CHECK(prev == 1.0);
    CHECK(run({"hit-rate", corpus, "--reference", corpus + "/reference.tsv", "--k", "0"}).code == cli::kUsage);
}

TEST_CASE("sweep writes one row per criterion and tolerance") {
    testutil::TempDir dir("cli");
    const auto corpus = make_corpus(dir, 3);
    auto r = run({"sweep", corpus, "--reference", corpus + "/reference.tsv", "--criteria", "norm,entropy",
                  "--tolerances", "20,50"});
    CHECK(r.code == 0);
    CHECK(count_lines(r.out) == 1 + 2 * 2);
    CHECK(r.out.find("\nnorm,20,") != std::string::npos);
    CHECK(r.out.find("\nentropy,50,") != std::string::npos);
}

TEST_CASE("config file supplies defaults; flags win") {
    testutil::TempDir dir("cli");
    {
        std::ofstream c(dir / "run.cfg");
        c << "# synth settings\nseed = 5\ncount = 2\nout = " << (dir / "cfg") << "\n";
    }
    auto r = run({"synth", "--config", dir / "run.cfg", "--count", "3"});
    CHECK(r.code == 0);
    CHECK(count_lines(slurp(dir / "cfg/manifest.jsonl")) == 3);
    auto again = run({"synth", "--seed", "5", "--count", "3", "--out", dir / "direct"});
    CHECK(slurp(dir / "cfg/reference.tsv") == slurp(dir / "direct/reference.tsv"));

    const auto flags = cli::config_flags(dir / "run.cfg", {"--seed", "9"});
    CHECK(flags == std::vector<std::string>{"--count", "2", "--out", dir / "cfg"});
    CHECK(run({"synth", "--config", dir / "nope.cfg"}).code == cli::kUsage);
}

TEST_CASE("usage errors and help") {
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({"align", "x.atnm", "--criterion", "bogus"}).code == cli::kUsage);
    auto h = run({"--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("align") != std::string::npos);
}

} // TEST_SUITE
