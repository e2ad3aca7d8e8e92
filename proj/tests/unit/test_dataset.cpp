#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <string>

#include "hybridroute/dataset.hpp"
#include "hybridroute/errors.hpp"
#include "hybridroute/synth.hpp"

using namespace hybridroute;

namespace {

const char* kMinimal =
    R"({"id":"a","query_text":"hi","small":{"bart_score":[-1.0]},"large":{"bart_score":[-1.0]},"split":"train"})";

std::string record(const std::string& id, const std::string& split) {
    return R"({"id":")" + id + R"(","query_text":"q )" + id +
           R"(","small":{"bart_score":[-1.0,-2.0]},"large":{"bart_score":[-1.5]},"split":")" + split + "\"}";
}

}  // namespace

TEST_CASE("minimal record loads") {
    const Dataset d = parse_dataset(kMinimal);
    REQUIRE(d.samples.size() == 1);
    CHECK(d.samples[0].id == "a");
    CHECK(d.samples[0].query_text == "hi");
    CHECK(d.samples[0].split == Split::train);
    CHECK(d.samples[0].small_values("bart_score") == std::vector<double>{-1.0});
    CHECK(d.declared_metrics == std::set<std::string>{"bart_score"});
}

TEST_CASE("duplicate id is a schema error naming the id") {
    const std::string text = std::string(kMinimal) + "\n" + kMinimal + "\n";
    try {
        parse_dataset(text);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
}

TEST_CASE("missing expected metric names id and metric") {
    const std::string text =
        R"({"id":"x7","query_text":"hi","small":{"gpt4_score":[1]},"large":{"bart_score":[-1],"gpt4_score":[2]},"split":"test"})";
    try {
        parse_dataset(text, std::set<std::string>{"bart_score"});
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("x7") != std::string::npos);
        CHECK(msg.find("bart_score") != std::string::npos);
    }
}

TEST_CASE("malformed line reports its line number") {
    const std::string text = std::string(kMinimal) + "\n{not json\n";
    try {
        parse_dataset(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("schema violations") {
    SUBCASE("empty sample list") {
        CHECK_THROWS_AS(
            parse_dataset(R"({"id":"a","query_text":"","small":{"m":[]},"large":{"m":[1]},"split":"train"})"),
            SchemaError);
    }
    SUBCASE("bad split") {
        CHECK_THROWS_AS(
            parse_dataset(R"({"id":"a","query_text":"","small":{"m":[1]},"large":{"m":[1]},"split":"dev"})"),
            ParseError);
    }
    SUBCASE("missing key") {
        CHECK_THROWS_AS(parse_dataset(R"({"id":"a","small":{"m":[1]},"large":{"m":[1]},"split":"train"})"),
                        ParseError);
    }
    SUBCASE("embedding length disagrees with header") {
        const std::string text = R"({"meta":{"embedding_dim":3}})"
                                 "\n"
                                 R"({"id":"a","query_text":"","embedding":[1,2],"small":{"m":[1]},"large":{"m":[1]},"split":"train"})";
        CHECK_THROWS_AS(parse_dataset(text), SchemaError);
    }
    SUBCASE("meta header after a record") {
        const std::string text = std::string(kMinimal) + "\n" + R"({"meta":{"metrics":["bart_score"]}})";
        CHECK_THROWS_AS(parse_dataset(text), ParseError);
    }
}

TEST_CASE("optional response payload is ignored") {
    const Dataset d = parse_dataset(
        R"({"id":"a","query_text":"hi","small":{"m":[1]},"large":{"m":[2]},"split":"train","small_responses":["x"]})");
    CHECK(d.samples.size() == 1);
}

TEST_CASE("split_view keeps order and partitions the dataset") {
    const std::string text = record("1", "train") + "\n" + record("2", "test") + "\n" + record("3", "train") + "\n";
    const Dataset d = parse_dataset(text);
    const auto train = split_view(d, Split::train);
    REQUIRE(train.size() == 2);
    CHECK(train[0].id == "1");
    CHECK(train[1].id == "3");
    CHECK(split_view(d, Split::validation).empty());

    const Dataset big = synth(SynthPreset::symmetric_random, 97, 3);
    std::multiset<std::string> ids;
    for (auto s : {Split::train, Split::validation, Split::test}) {
        for (const auto& q : split_view(big, s)) ids.insert(q.id);
    }
    std::multiset<std::string> all;
    for (const auto& q : big.samples) all.insert(q.id);
    CHECK(ids == all);
}

TEST_CASE("serialize then reload is the identity") {
    for (auto preset : {SynthPreset::separable, SynthPreset::gap_correlated, SynthPreset::symmetric_random}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const Dataset d = synth(preset, 40, seed);
            const std::string bytes = serialize_dataset(d);
            const Dataset back = parse_dataset(bytes);
            CHECK(back == d);
            CHECK(serialize_dataset(back) == bytes);
        }
    }
}

TEST_CASE("loading from a file is pure") {
    const auto path = std::filesystem::temp_directory_path() / "hybridroute_dataset_test.jsonl";
    save_dataset(synth(SynthPreset::separable, 25, 11), path);
    CHECK(load_dataset(path) == load_dataset(path));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_dataset(path), InputError);
}

TEST_CASE("subsample is seeded and order preserving") {
    const Dataset d = synth(SynthPreset::separable, 50, 5);
    const auto a = subsample(d.samples, 10, 9);
    const auto b = subsample(d.samples, 10, 9);
    REQUIRE(a.size() == 10);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1].id < a[i].id);
    CHECK(subsample(d.samples, 500, 1).size() == 50);
}
