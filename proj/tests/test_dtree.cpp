#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cosmos/dtree.hpp"
#include "cosmos/errors.hpp"
#include "cosmos/rng.hpp"
#include "dtree_oracle.hpp"
#include "test_support.hpp"

using namespace cosmos;
using namespace cosmos::dtree;
using testsupport::parse_kind;

namespace {

Dataset weather() {
    return load_dataset_file(std::string(COSMOS_DATA_DIR) + "/weather.data");
}

// Two categorical attributes, label = (a0 != a1). No single attribute carries
// information gain.
Dataset xor_dataset() {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Categorical, {"v0", "v1"}},
                           {"a1", AttrKind::Categorical, {"v0", "v1"}}};
    d.schema.label_domain = {"same", "diff"};
    for (int a : {0, 1}) {
        for (int b : {0, 1}) {
            Row row;
            row.cells = {Cell::category(a), Cell::category(b)};
            row.label = a == b ? 0 : 1;
            d.rows.push_back(std::move(row));
        }
    }
    return d;
}

int depth_of(const TreeNode& node) {
    if (node.is_leaf()) return 0;
    int deepest = 0;
    for (const auto& b : node.branches) deepest = std::max(deepest, 1 + depth_of(b));
    return deepest;
}

std::size_t training_errors(const DecisionTree& tree, const Dataset& data) {
    std::size_t bad = 0;
    for (const auto& row : data.rows)
        if (classify(tree, row.cells).label != row.label) ++bad;
    return bad;
}

bool same_rows(const Dataset& a, const Dataset& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].label != b.rows[i].label) return false;
        if (a.rows[i].cells != b.rows[i].cells) return false;
    }
    return true;
}

std::string temp_path(const char* stem) {
    return (std::filesystem::temp_directory_path() /
            (std::string(stem) + "-" + std::to_string(::getpid())))
        .string();
}

}  // namespace

TEST_CASE("entropy of a pure count vector is zero") {
    CHECK(entropy(std::vector<double>{4.0}) == 0.0);
    CHECK(entropy(std::vector<double>{7.0, 0.0}) == 0.0);
}

TEST_CASE("entropy of a balanced binary vector is one bit") {
    CHECK(entropy(std::vector<double>{2.0, 2.0}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("entropy of {9,5} matches the committed oracle value") {
    // tests/oracle/entropy_oracle.py 9 5
    CHECK(entropy(std::vector<double>{9.0, 5.0}) ==
          doctest::Approx(0.9402859586706311).epsilon(1e-12));
}

TEST_CASE("entropy rejects empty, all-zero and negative count vectors") {
    CHECK_THROWS_AS(entropy(std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(entropy(std::vector<double>{0.0, 0.0}), DomainError);
    CHECK_THROWS_AS(entropy(std::vector<double>{3.0, -1.0}), DomainError);
}

TEST_CASE("entropy is maximal at the uniform vector and positive when impure") {
    Rng rng(101);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t k = 2 + rng.index(5);
        std::vector<double> counts;
        std::size_t positive = 0;
        for (std::size_t i = 0; i < k; ++i) {
            counts.push_back(static_cast<double>(rng.index(20)));
            if (counts.back() > 0.0) ++positive;
        }
        if (positive == 0) counts[0] = 1.0, positive = 1;
        const double h = entropy(counts);
        CHECK(h <= std::log2(static_cast<double>(k)) + 1e-9);
        if (positive >= 2) CHECK(h > 0.0);

        std::vector<double> uniform(k, 3.0);
        CHECK(entropy(uniform) ==
              doctest::Approx(std::log2(static_cast<double>(k))).epsilon(1e-12));
    }
}

TEST_CASE("gain ratio on the 14-row outlook partition matches the committed oracle") {
    // tests/oracle/gain_oracle.py 2,3:4,0:3,2
    auto score = gain_ratio(weather(), 0, std::nullopt);
    CHECK(score.info_gain == doctest::Approx(0.24674981977443933).epsilon(1e-12));
    CHECK(score.split_info == doctest::Approx(1.5774062828523454).epsilon(1e-12));
    CHECK(score.ratio == doctest::Approx(0.15642756242117528).epsilon(1e-12));
}

TEST_CASE("gain ratio of a constant attribute is zero with zero split info") {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Categorical, {"v0", "v1"}}};
    d.schema.label_domain = {"l0", "l1"};
    for (int label : {0, 1, 0, 1}) {
        Row row;
        row.cells = {Cell::category(0)};
        row.label = label;
        d.rows.push_back(std::move(row));
    }
    auto score = gain_ratio(d, 0, std::nullopt);
    CHECK(score.info_gain == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(score.split_info == 0.0);
    CHECK(score.ratio == 0.0);
}

TEST_CASE("gain ratio of a perfect balanced binary split is 1/1/1") {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Categorical, {"v0", "v1"}}};
    d.schema.label_domain = {"l0", "l1"};
    for (int i = 0; i < 4; ++i) {
        Row row;
        row.cells = {Cell::category(i % 2)};
        row.label = i % 2;
        d.rows.push_back(std::move(row));
    }
    auto score = gain_ratio(d, 0, std::nullopt);
    CHECK(score.info_gain == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(score.split_info == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(score.ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gain ratio validates the threshold against the attribute kind") {
    auto d = weather();
    CHECK_THROWS_AS(gain_ratio(d, 0, 1.5), UsageError);            // categorical + threshold
    CHECK_THROWS_AS(gain_ratio(d, 1, std::nullopt), UsageError);   // continuous without
    CHECK_THROWS_AS(gain_ratio(d, 9, 1.5), UsageError);            // attribute out of range
    Dataset empty;
    empty.schema = d.schema;
    CHECK_THROWS_AS(gain_ratio(empty, 0, std::nullopt), UsageError);
}

TEST_CASE("gain ratio agrees with the independent oracle on random splits") {
    Rng rng(202);
    for (int iter = 0; iter < 200; ++iter) {
        auto d = oracle::random_dataset(rng, true);
        if (d.rows.empty()) continue;
        std::vector<std::size_t> rows(d.rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        for (std::size_t a = 0; a < d.schema.attributes.size(); ++a) {
            std::optional<double> threshold;
            if (d.schema.attributes[a].kind == AttrKind::Continuous)
                threshold = 0.5 + static_cast<double>(rng.index(9));
            auto mine = gain_ratio(d, static_cast<int>(a), threshold);
            auto groups = oracle::partition(d, rows, static_cast<int>(a), threshold);
            auto expected = oracle::score_groups(d, rows, groups);
            CHECK(mine.info_gain == doctest::Approx(expected.info_gain).epsilon(1e-12));
            CHECK(mine.split_info == doctest::Approx(expected.split_info).epsilon(1e-12));
            CHECK(mine.ratio == doctest::Approx(expected.ratio).epsilon(1e-12));
        }
    }
}

TEST_CASE("choose_split returns nothing on pure data") {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Continuous, {}}};
    d.schema.label_domain = {"l0", "l1"};
    for (double v : {1.0, 2.0, 3.0}) {
        Row row;
        row.cells = {Cell::number(v)};
        row.label = 0;
        d.rows.push_back(std::move(row));
    }
    CHECK_FALSE(choose_split(d).has_value());
}

TEST_CASE("choose_split places the threshold midway between 60 and 70") {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Continuous, {}}};
    d.schema.label_domain = {"l0", "l1"};
    Row r1, r2;
    r1.cells = {Cell::number(60.0)};
    r1.label = 0;
    r2.cells = {Cell::number(70.0)};
    r2.label = 1;
    d.rows = {r1, r2};
    auto choice = choose_split(d);
    REQUIRE(choice.has_value());
    CHECK(choice->attribute == 0);
    REQUIRE(choice->threshold.has_value());
    CHECK(*choice->threshold == 65.0);
}

TEST_CASE("choose_split rejects an empty dataset") {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Continuous, {}}};
    d.schema.label_domain = {"l0", "l1"};
    CHECK_THROWS_AS(choose_split(d), UsageError);
}

TEST_CASE("choose_split still splits an impure zero-gain node") {
    auto choice = choose_split(xor_dataset());
    REQUIRE(choice.has_value());
    CHECK(choice->attribute == 0);  // first candidate in tie order
    CHECK_FALSE(choice->threshold.has_value());
}

TEST_CASE("choose_split matches the independent oracle on random datasets") {
    Rng rng(303);
    for (int iter = 0; iter < 400; ++iter) {
        const bool with_missing = iter % 2 == 0;
        auto d = oracle::random_dataset(rng, with_missing);
        CAPTURE(iter);
        CHECK(choose_split(d) == oracle::choose(d));
    }
}

TEST_CASE("train collapses single-label data to one leaf") {
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Categorical, {"v0", "v1"}}};
    d.schema.label_domain = {"only"};
    for (int i = 0; i < 5; ++i) {
        Row row;
        row.cells = {Cell::category(i % 2)};
        row.label = 0;
        d.rows.push_back(std::move(row));
    }
    auto tree = train(d);
    CHECK(tree.root.is_leaf());
    CHECK(tree.trained_on == 5);
    auto got = classify(tree, std::vector<Cell>{Cell::missing()});
    CHECK(got.label == 0);
    CHECK(got.confidence == 1.0);
}

TEST_CASE("train separates XOR at depth two and classifies it back exactly") {
    auto d = xor_dataset();
    auto tree = train(d);
    CHECK(depth_of(tree.root) == 2);
    CHECK(training_errors(tree, d) == 0);
}

TEST_CASE("train respects min_leaf and max_depth") {
    auto d = xor_dataset();
    auto stumped = train(d, TrainParams{2, 1, false});
    CHECK(depth_of(stumped.root) <= 1);
    auto leafed = train(d, TrainParams{5, 12, false});
    CHECK(leafed.root.is_leaf());
    CHECK_THROWS_AS(train(d, TrainParams{0, 12, false}), UsageError);
    CHECK_THROWS_AS(train(d, TrainParams{2, 0, false}), UsageError);
    Dataset empty;
    empty.schema = d.schema;
    CHECK_THROWS_AS(train(empty, TrainParams{}), UsageError);
}

TEST_CASE("train validates rows against the schema") {
    auto d = xor_dataset();
    d.rows[1].cells.pop_back();
    CHECK_THROWS_AS(train(d), UsageError);
    auto d2 = xor_dataset();
    d2.rows[0].label = 7;
    CHECK_THROWS_AS(train(d2), UsageError);
}

TEST_CASE("consistent complete data classifies back perfectly, pruned or not") {
    Rng rng(404);
    for (int iter = 0; iter < 60; ++iter) {
        auto d = oracle::make_consistent(oracle::random_dataset(rng, false));
        auto grown = train(d, TrainParams{2, 64, false});
        CHECK(training_errors(grown, d) == 0);
        auto pruned = train(d, TrainParams{2, 64, true});
        CHECK(training_errors(pruned, d) == 0);
    }
}

TEST_CASE("subtree replacement collapses a split that explains nothing") {
    // Both attribute values carry the same 3:2 label mix, so the split cannot
    // beat the collapsed leaf and the tie goes to replacement.
    Dataset d;
    d.schema.attributes = {{"a0", AttrKind::Categorical, {"v0", "v1"}}};
    d.schema.label_domain = {"l0", "l1"};
    for (int v : {0, 1}) {
        for (int i = 0; i < 5; ++i) {
            Row row;
            row.cells = {Cell::category(v)};
            row.label = i < 3 ? 0 : 1;
            d.rows.push_back(std::move(row));
        }
    }
    auto grown = train(d, TrainParams{2, 12, false});
    CHECK_FALSE(grown.root.is_leaf());
    auto pruned = train(d, TrainParams{2, 12, true});
    CHECK(pruned.root.is_leaf());
    CHECK(pruned.root.label == 0);
}

TEST_CASE("pruning never increases training error") {
    Rng rng(505);
    for (int iter = 0; iter < 100; ++iter) {
        auto d = oracle::random_dataset(rng, true);
        auto grown = train(d, TrainParams{2, 12, false});
        auto pruned = train(d, TrainParams{2, 12, true});
        CHECK(training_errors(pruned, d) <= training_errors(grown, d));
    }
}

TEST_CASE("classify follows the majority branch on missing or unlisted values") {
    DecisionTree tree;
    tree.schema.attributes = {{"a0", AttrKind::Categorical, {"v0", "v1", "v2"}}};
    tree.schema.label_domain = {"A", "B"};
    tree.root.attribute = 0;
    tree.root.branch_values = {0, 1};
    tree.root.majority_branch = 1;
    TreeNode leaf_a;
    leaf_a.label = 0;
    leaf_a.class_counts = {2.0, 0.0};
    TreeNode leaf_b;
    leaf_b.label = 1;
    leaf_b.class_counts = {0.0, 3.0};
    tree.root.branches = {leaf_a, leaf_b};

    CHECK(classify(tree, std::vector<Cell>{Cell::category(0)}).label == 0);
    CHECK(classify(tree, std::vector<Cell>{Cell::category(1)}).label == 1);
    // missing and value v2 (never branched on) both land on the majority branch
    CHECK(classify(tree, std::vector<Cell>{Cell::missing()}).label == 1);
    CHECK(classify(tree, std::vector<Cell>{Cell::category(2)}).label == 1);
}

TEST_CASE("classify reports the leaf majority fraction as confidence") {
    DecisionTree tree;
    tree.schema.attributes = {{"a0", AttrKind::Continuous, {}}};
    tree.schema.label_domain = {"A", "B"};
    tree.root.label = 0;
    tree.root.class_counts = {3.0, 1.0};
    auto got = classify(tree, std::vector<Cell>{Cell::number(5.0)});
    CHECK(got.label == 0);
    CHECK(got.confidence == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("classify rejects rows that do not fit the schema") {
    auto tree = train(xor_dataset());
    CHECK_THROWS_AS(classify(tree, std::vector<Cell>{Cell::category(0)}), UsageError);
    CHECK_THROWS_AS(
        classify(tree, std::vector<Cell>{Cell::number(1.0), Cell::category(0)}), UsageError);
    CHECK_THROWS_AS(
        classify(tree, std::vector<Cell>{Cell::category(5), Cell::category(0)}), UsageError);
}

TEST_CASE("sufficiency needs both the row count and the accuracy bar") {
    SufficiencyParams p;  // 50 rows, 0.70
    CHECK(is_sufficiently_trained(50, 0.70, p));
    CHECK(is_sufficiently_trained(200, 1.0, p));
    CHECK_FALSE(is_sufficiently_trained(49, 1.0, p));
    CHECK_FALSE(is_sufficiently_trained(50, 0.699, p));
    CHECK_FALSE(is_sufficiently_trained(0, 1.0, p));
}

TEST_CASE("training is deterministic") {
    auto d = weather();
    CHECK(tree_to_json(train(d)) == tree_to_json(train(d)));
}

TEST_CASE("the weather fixture loads, trains and classifies back") {
    auto d = weather();
    REQUIRE(d.rows.size() == 14);
    REQUIRE(d.schema.attributes.size() == 4);
    CHECK(d.schema.attributes[0].kind == AttrKind::Categorical);
    CHECK(d.schema.attributes[1].kind == AttrKind::Continuous);
    CHECK(d.schema.label_domain == std::vector<std::string>{"yes", "no"});
    auto tree = train(d);
    CHECK(training_errors(tree, d) == 0);
}

TEST_CASE("datasets round trip through save and load") {
    Rng rng(606);
    for (int iter = 0; iter < 20; ++iter) {
        auto d = oracle::random_dataset(rng, true);
        std::ostringstream out;
        save_dataset(d, out);
        std::istringstream in(out.str());
        auto back = load_dataset(in);
        CHECK(back.schema == d.schema);
        CHECK(same_rows(back, d));
    }
}

TEST_CASE("dataset parse errors carry the right kind") {
    using cosmos::ParseErrorKind;
    auto load = [](const char* text) {
        std::istringstream in(text);
        return load_dataset(in);
    };
    CHECK(parse_kind([&] { load("a0:CONT\n1,yes\n"); }) == ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { load("a0:WAT|label:CAT(yes;no)\n"); }) == ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { load("a0:CONT|label:CAT(yes;no)\n1\n"); }) ==
          ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { load("a0:CONT|label:CAT(yes;no)\nx,yes\n"); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] { load("a0:CONT|label:CAT(yes;no)\n1,maybe\n"); }) ==
          ParseErrorKind::ValueError);
    CHECK(parse_kind([&] {
              load("a0:CAT(v0;v1)|label:CAT(yes;no)\nv7,yes\n");
          }) == ParseErrorKind::ValueError);
}

TEST_CASE("parse_row maps ? to missing and validates values") {
    auto schema = weather().schema;
    auto cells = parse_row(schema, "sunny,?,85,false");
    REQUIRE(cells.size() == 4);
    CHECK(cells[0] == Cell::category(0));
    CHECK(cells[1].is_missing());
    CHECK(cells[2] == Cell::number(85.0));
    CHECK(parse_kind([&] { parse_row(schema, "sunny,85,85"); }) ==
          cosmos::ParseErrorKind::Malformed);
    CHECK(parse_kind([&] { parse_row(schema, "cloudy,85,85,false"); }) ==
          cosmos::ParseErrorKind::ValueError);
}

TEST_CASE("models round trip through JSON byte for byte") {
    auto d = weather();
    auto tree = train(d);
    auto text = tree_to_json(tree);
    auto back = tree_from_json(text);
    CHECK(tree_to_json(back) == text);
    CHECK(back.schema == tree.schema);
    CHECK(back.trained_on == tree.trained_on);
    for (const auto& row : d.rows)
        CHECK(classify(back, row.cells).label == classify(tree, row.cells).label);
}

TEST_CASE("model files round trip on disk") {
    auto tree = train(weather());
    auto path = temp_path("cosmos-model");
    save_model_file(tree, path);
    auto back = load_model_file(path);
    CHECK(tree_to_json(back) == tree_to_json(tree));
    std::remove(path.c_str());
}

TEST_CASE("model parse errors carry the right kind") {
    using cosmos::ParseErrorKind;
    CHECK(parse_kind([] { tree_from_json("not json"); }) == ParseErrorKind::Malformed);
    CHECK(parse_kind([] { tree_from_json("{\"format\":\"other\"}"); }) ==
          ParseErrorKind::SchemaViolation);
    CHECK(parse_kind([] { tree_from_json("{\"format\":\"cosmos-tree-v1\"}"); }) ==
          ParseErrorKind::SchemaViolation);
}
