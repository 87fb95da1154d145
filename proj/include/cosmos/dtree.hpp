#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cosmos::dtree {

enum class AttrKind { Categorical, Continuous };

struct Attribute {
    std::string name;
    AttrKind kind = AttrKind::Categorical;
    std::vector<std::string> values;  // declared value set, categorical only
};

struct AttributeSchema {
    std::vector<Attribute> attributes;
    std::vector<std::string> label_domain;

    // Throws UsageError on duplicate names, empty value sets or labels.
    void validate() const;

    int attribute_index(std::string_view name) const;           // -1 if absent
    int value_index(int attribute, std::string_view value) const;  // -1 if absent
    int label_index(std::string_view label) const;               // -1 if absent

    bool operator==(const AttributeSchema&) const = default;
};

inline bool operator==(const Attribute& a, const Attribute& b) {
    return a.name == b.name && a.kind == b.kind && a.values == b.values;
}

// One attribute value: missing, a categorical value index, or a number.
class Cell {
public:
    Cell() = default;
    static Cell missing() { return Cell(); }
    static Cell category(int value_index);
    static Cell number(double value);  // must be finite

    bool is_missing() const { return tag_ == Tag::Missing; }
    bool is_category() const { return tag_ == Tag::Category; }
    bool is_number() const { return tag_ == Tag::Number; }
    int category_index() const { return category_; }
    double value() const { return number_; }

    bool operator==(const Cell&) const = default;

private:
    enum class Tag { Missing, Category, Number };
    Tag tag_ = Tag::Missing;
    int category_ = -1;
    double number_ = 0.0;
};

struct Row {
    std::vector<Cell> cells;
    int label = 0;  // index into label_domain
};

struct Dataset {
    AttributeSchema schema;
    std::vector<Row> rows;
};

// Internal node when branches is non-empty, leaf otherwise.
// Categorical splits carry one branch per value observed at the node
// (branch_values gives each branch's value index); rows with a missing or
// unlisted value follow majority_branch. Continuous splits have exactly two
// branches: <= threshold and > threshold.
struct TreeNode {
    int attribute = -1;
    std::optional<double> threshold;
    std::vector<int> branch_values;
    std::vector<TreeNode> branches;
    int majority_branch = 0;

    int label = 0;
    std::vector<double> class_counts;

    bool is_leaf() const { return branches.empty(); }
};

struct DecisionTree {
    TreeNode root;
    AttributeSchema schema;
    std::size_t trained_on = 0;
};

struct TrainParams {
    int min_leaf = 2;
    int max_depth = 12;
    bool prune = false;
};

struct SplitScore {
    double info_gain = 0.0;
    double split_info = 0.0;
    double ratio = 0.0;
};

struct SplitChoice {
    int attribute = -1;
    std::optional<double> threshold;

    bool operator==(const SplitChoice&) const = default;
};

struct Classification {
    int label = 0;
    double confidence = 1.0;  // majority-class fraction at the leaf, in (0, 1]
};

struct SufficiencyParams {
    std::size_t min_rows = 50;
    double min_accuracy = 0.70;
};

// Shannon entropy in bits of a per-label count vector. Throws DomainError if
// no count is positive or any count is negative.
double entropy(std::span<const double> class_counts);

// Gain ratio statistics for splitting the whole dataset on one attribute.
// threshold must be present iff the attribute is continuous.
SplitScore gain_ratio(const Dataset& data, int attribute, std::optional<double> threshold);

// Best split by gain ratio among candidates whose information gain reaches
// the mean gain of positive-gain candidates. Candidate thresholds are the
// midpoints between adjacent distinct values. When no candidate has positive
// gain but the node is impure and splittable, the first viable split is still
// returned so that class structure invisible to single-attribute gain (e.g.
// XOR) is separated deeper down. Ties: smaller attribute index, then smaller
// threshold. nullopt for pure or unsplittable data.
std::optional<SplitChoice> choose_split(const Dataset& data);

// Top-down induction. Stops at pure nodes, the depth limit, nodes smaller
// than min_leaf, or when choose_split yields nothing. Leaf label is the
// majority class (ties: label_domain order). With prune, a subtree is
// replaced by a leaf whenever the leaf's training error does not exceed the
// subtree's.
DecisionTree train(const Dataset& data, const TrainParams& params = {});

// Walks the tree; missing (or unlisted categorical) values follow the
// majority branch. Throws UsageError if the row does not conform to the
// tree's schema.
Classification classify(const DecisionTree& tree, std::span<const Cell> row);

bool is_sufficiently_trained(std::size_t store_size, double holdout_accuracy,
                             const SufficiencyParams& params);

// --- dataset / model files -------------------------------------------------

// Header `name:kind[,...]|label:CAT(v1;v2;...)` where kind is CONT or
// CAT(v1;v2;...), then one CSV row per instance, `?` for missing. Blank
// lines and `#` comments are skipped.
Dataset load_dataset(std::istream& in);
Dataset load_dataset_file(const std::string& path);
void save_dataset(const Dataset& data, std::ostream& out);

// Parse one CSV value row (no label column) against a schema.
std::vector<Cell> parse_row(const AttributeSchema& schema, std::string_view csv);

std::string tree_to_json(const DecisionTree& tree);
DecisionTree tree_from_json(std::string_view text);
void save_model_file(const DecisionTree& tree, const std::string& path);
DecisionTree load_model_file(const std::string& path);

}  // namespace cosmos::dtree
