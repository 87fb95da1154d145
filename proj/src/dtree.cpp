#include "cosmos/dtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cosmos/errors.hpp"

namespace cosmos::dtree {

namespace {

// Guard against float dust when deciding whether a gain counts as positive
// or clears the mean-gain bar.
constexpr double kGainEps = 1e-12;

}  // namespace

void AttributeSchema::validate() const {
    std::set<std::string> names;
    for (const auto& attr : attributes) {
        if (attr.name.empty()) throw UsageError("schema: empty attribute name");
        if (!names.insert(attr.name).second)
            throw UsageError("schema: duplicate attribute name " + attr.name);
        if (attr.kind == AttrKind::Categorical) {
            if (attr.values.empty())
                throw UsageError("schema: categorical attribute " + attr.name + " has no values");
            std::set<std::string> vals(attr.values.begin(), attr.values.end());
            if (vals.size() != attr.values.size())
                throw UsageError("schema: duplicate value in attribute " + attr.name);
        }
    }
    if (label_domain.empty()) throw UsageError("schema: empty label domain");
    std::set<std::string> labels(label_domain.begin(), label_domain.end());
    if (labels.size() != label_domain.size()) throw UsageError("schema: duplicate label");
}

int AttributeSchema::attribute_index(std::string_view name) const {
    for (std::size_t i = 0; i < attributes.size(); ++i)
        if (attributes[i].name == name) return static_cast<int>(i);
    return -1;
}

int AttributeSchema::value_index(int attribute, std::string_view value) const {
    const auto& vals = attributes.at(static_cast<std::size_t>(attribute)).values;
    for (std::size_t i = 0; i < vals.size(); ++i)
        if (vals[i] == value) return static_cast<int>(i);
    return -1;
}

int AttributeSchema::label_index(std::string_view label) const {
    for (std::size_t i = 0; i < label_domain.size(); ++i)
        if (label_domain[i] == label) return static_cast<int>(i);
    return -1;
}

Cell Cell::category(int value_index) {
    if (value_index < 0) throw UsageError("categorical value index must be non-negative");
    Cell c;
    c.tag_ = Tag::Category;
    c.category_ = value_index;
    return c;
}

Cell Cell::number(double value) {
    if (!std::isfinite(value)) throw UsageError("continuous cell must be finite");
    Cell c;
    c.tag_ = Tag::Number;
    c.number_ = value;
    return c;
}

double entropy(std::span<const double> class_counts) {
    double total = 0.0;
    for (double c : class_counts) {
        if (c < 0.0) throw DomainError("entropy: negative count");
        total += c;
    }
    if (total <= 0.0) throw DomainError("entropy: all counts are zero");
    double h = 0.0;
    for (double c : class_counts) {
        if (c <= 0.0) continue;
        const double p = c / total;
        h -= p * std::log2(p);
    }
    return h;
}

namespace {

using RowIndex = std::vector<std::size_t>;

std::vector<double> label_counts(const Dataset& data, const RowIndex& rows) {
    std::vector<double> counts(data.schema.label_domain.size(), 0.0);
    for (auto r : rows) counts[static_cast<std::size_t>(data.rows[r].label)] += 1.0;
    return counts;
}

// Groups rows by branch of the given split. Rows with a missing value are
// appended to the group that held the most known-value rows (ties: first
// group). Categorical groups are ordered by value index; continuous splits
// produce exactly the <= and > groups.
struct Partition {
    std::vector<RowIndex> groups;
    std::vector<int> branch_values;  // categorical only
    std::size_t majority_group = 0;
};

Partition partition_rows(const Dataset& data, const RowIndex& rows, int attribute,
                         std::optional<double> threshold) {
    const auto& attr = data.schema.attributes[static_cast<std::size_t>(attribute)];
    Partition p;
    RowIndex missing;

    if (attr.kind == AttrKind::Categorical) {
        std::vector<RowIndex> by_value(attr.values.size());
        for (auto r : rows) {
            const Cell& cell = data.rows[r].cells[static_cast<std::size_t>(attribute)];
            if (cell.is_missing())
                missing.push_back(r);
            else
                by_value[static_cast<std::size_t>(cell.category_index())].push_back(r);
        }
        for (std::size_t v = 0; v < by_value.size(); ++v) {
            if (by_value[v].empty()) continue;
            p.branch_values.push_back(static_cast<int>(v));
            p.groups.push_back(std::move(by_value[v]));
        }
    } else {
        p.groups.resize(2);
        for (auto r : rows) {
            const Cell& cell = data.rows[r].cells[static_cast<std::size_t>(attribute)];
            if (cell.is_missing())
                missing.push_back(r);
            else
                p.groups[cell.value() <= *threshold ? 0 : 1].push_back(r);
        }
    }

    if (p.groups.empty()) {
        // Attribute missing on every row: all rows form one group, so the
        // split is never viable and carries no gain.
        p.groups.push_back(std::move(missing));
        return p;
    }
    for (std::size_t g = 0; g < p.groups.size(); ++g)
        if (p.groups[g].size() > p.groups[p.majority_group].size()) p.majority_group = g;
    auto& target = p.groups[p.majority_group];
    target.insert(target.end(), missing.begin(), missing.end());
    return p;
}

std::size_t non_empty_groups(const Partition& p) {
    std::size_t n = 0;
    for (const auto& g : p.groups)
        if (!g.empty()) ++n;
    return n;
}

SplitScore score_partition(const Dataset& data, const RowIndex& rows, const Partition& p) {
    const double parent_h = entropy(label_counts(data, rows));
    const double total = static_cast<double>(rows.size());

    double weighted_child_h = 0.0;
    std::vector<double> sizes;
    sizes.reserve(p.groups.size());
    for (const auto& g : p.groups) {
        sizes.push_back(static_cast<double>(g.size()));
        if (g.empty()) continue;
        weighted_child_h += (static_cast<double>(g.size()) / total) * entropy(label_counts(data, g));
    }

    SplitScore s;
    s.info_gain = parent_h - weighted_child_h;
    bool any = false;
    for (double sz : sizes) any = any || sz > 0.0;
    s.split_info = any ? entropy(sizes) : 0.0;
    s.ratio = s.split_info > 0.0 ? s.info_gain / s.split_info : 0.0;
    return s;
}

struct Candidate {
    SplitChoice choice;
    SplitScore score;
};

// Candidate thresholds: midpoints between adjacent distinct known values.
std::vector<double> candidate_thresholds(const Dataset& data, const RowIndex& rows,
                                         int attribute) {
    std::vector<double> values;
    for (auto r : rows) {
        const Cell& cell = data.rows[r].cells[static_cast<std::size_t>(attribute)];
        if (!cell.is_missing()) values.push_back(cell.value());
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> thresholds;
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
        thresholds.push_back((values[i] + values[i + 1]) / 2.0);
    return thresholds;
}

std::vector<Candidate> enumerate_candidates(const Dataset& data, const RowIndex& rows) {
    std::vector<Candidate> out;
    for (std::size_t a = 0; a < data.schema.attributes.size(); ++a) {
        const int attr = static_cast<int>(a);
        if (data.schema.attributes[a].kind == AttrKind::Categorical) {
            Partition p = partition_rows(data, rows, attr, std::nullopt);
            if (non_empty_groups(p) < 2) continue;
            out.push_back({SplitChoice{attr, std::nullopt}, score_partition(data, rows, p)});
        } else {
            for (double t : candidate_thresholds(data, rows, attr)) {
                Partition p = partition_rows(data, rows, attr, t);
                if (non_empty_groups(p) < 2) continue;
                out.push_back({SplitChoice{attr, t}, score_partition(data, rows, p)});
            }
        }
    }
    return out;
}

std::optional<SplitChoice> choose_split_rows(const Dataset& data, const RowIndex& rows) {
    if (rows.empty()) throw UsageError("choose_split: empty dataset");
    if (entropy(label_counts(data, rows)) == 0.0) return std::nullopt;  // pure

    const auto candidates = enumerate_candidates(data, rows);
    if (candidates.empty()) return std::nullopt;

    double positive_gain_sum = 0.0;
    std::size_t positive_count = 0;
    for (const auto& c : candidates) {
        if (c.score.info_gain > kGainEps) {
            positive_gain_sum += c.score.info_gain;
            ++positive_count;
        }
    }

    const Candidate* best = nullptr;
    if (positive_count > 0) {
        const double mean_gain = positive_gain_sum / static_cast<double>(positive_count);
        for (const auto& c : candidates) {
            if (c.score.info_gain <= kGainEps) continue;
            if (c.score.info_gain < mean_gain - kGainEps) continue;
            if (best == nullptr || c.score.ratio > best->score.ratio) best = &c;
        }
    } else {
        // Impure node where no single attribute carries gain: take the first
        // viable split anyway; candidates are enumerated in tie order.
        for (const auto& c : candidates) {
            if (best == nullptr || c.score.ratio > best->score.ratio) best = &c;
        }
    }
    return best->choice;
}

int majority_label(const std::vector<double>& counts) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i)
        if (counts[i] > counts[best]) best = i;  // ties: label_domain order
    return static_cast<int>(best);
}

TreeNode make_leaf(const Dataset& data, const RowIndex& rows) {
    TreeNode leaf;
    leaf.class_counts = label_counts(data, rows);
    leaf.label = majority_label(leaf.class_counts);
    return leaf;
}

TreeNode build_node(const Dataset& data, const RowIndex& rows, int depth,
                    const TrainParams& params) {
    if (depth >= params.max_depth || rows.size() < static_cast<std::size_t>(params.min_leaf))
        return make_leaf(data, rows);

    auto choice = choose_split_rows(data, rows);
    if (!choice) return make_leaf(data, rows);

    Partition p = partition_rows(data, rows, choice->attribute, choice->threshold);

    TreeNode node;
    node.attribute = choice->attribute;
    node.threshold = choice->threshold;
    node.branch_values = p.branch_values;
    node.majority_branch = static_cast<int>(p.majority_group);
    node.branches.reserve(p.groups.size());
    for (const auto& g : p.groups) node.branches.push_back(build_node(data, g, depth + 1, params));
    return node;
}

void aggregate_counts(const TreeNode& node, std::vector<double>& counts) {
    if (node.is_leaf()) {
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += node.class_counts[i];
        return;
    }
    for (const auto& child : node.branches) aggregate_counts(child, counts);
}

double subtree_training_error(const TreeNode& node) {
    if (node.is_leaf()) {
        double total = 0.0, best = 0.0;
        for (double c : node.class_counts) {
            total += c;
            best = std::max(best, c);
        }
        return total - best;
    }
    double err = 0.0;
    for (const auto& child : node.branches) err += subtree_training_error(child);
    return err;
}

// Bottom-up subtree replacement on training counts.
void prune_node(TreeNode& node, std::size_t n_labels) {
    if (node.is_leaf()) return;
    for (auto& child : node.branches) prune_node(child, n_labels);

    std::vector<double> counts(n_labels, 0.0);
    aggregate_counts(node, counts);
    double total = 0.0, best = 0.0;
    for (double c : counts) {
        total += c;
        best = std::max(best, c);
    }
    const double leaf_error = total - best;
    if (leaf_error <= subtree_training_error(node)) {
        TreeNode leaf;
        leaf.class_counts = std::move(counts);
        leaf.label = majority_label(leaf.class_counts);
        node = std::move(leaf);
    }
}

}  // namespace

SplitScore gain_ratio(const Dataset& data, int attribute, std::optional<double> threshold) {
    data.schema.validate();
    if (attribute < 0 || attribute >= static_cast<int>(data.schema.attributes.size()))
        throw UsageError("gain_ratio: attribute index out of range");
    const auto kind = data.schema.attributes[static_cast<std::size_t>(attribute)].kind;
    if (kind == AttrKind::Categorical && threshold.has_value())
        throw UsageError("gain_ratio: threshold given for a categorical attribute");
    if (kind == AttrKind::Continuous && !threshold.has_value())
        throw UsageError("gain_ratio: continuous attribute requires a threshold");
    if (data.rows.empty()) throw UsageError("gain_ratio: empty dataset");

    RowIndex rows(data.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return score_partition(data, rows, partition_rows(data, rows, attribute, threshold));
}

std::optional<SplitChoice> choose_split(const Dataset& data) {
    data.schema.validate();
    RowIndex rows(data.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return choose_split_rows(data, rows);
}

DecisionTree train(const Dataset& data, const TrainParams& params) {
    data.schema.validate();
    if (data.rows.empty()) throw UsageError("train: empty dataset");
    if (params.min_leaf < 1) throw UsageError("train: min_leaf must be >= 1");
    if (params.max_depth < 1) throw UsageError("train: max_depth must be >= 1");
    for (const auto& row : data.rows) {
        if (row.cells.size() != data.schema.attributes.size())
            throw UsageError("train: row width does not match schema");
        if (row.label < 0 || row.label >= static_cast<int>(data.schema.label_domain.size()))
            throw UsageError("train: label out of domain");
    }

    RowIndex rows(data.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;

    DecisionTree tree;
    tree.schema = data.schema;
    tree.trained_on = data.rows.size();
    tree.root = build_node(data, rows, 0, params);
    if (params.prune) prune_node(tree.root, data.schema.label_domain.size());
    return tree;
}

Classification classify(const DecisionTree& tree, std::span<const Cell> row) {
    const auto& attrs = tree.schema.attributes;
    if (row.size() != attrs.size()) throw UsageError("classify: row width does not match schema");
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (row[i].is_missing()) continue;
        if (attrs[i].kind == AttrKind::Categorical) {
            if (!row[i].is_category()) throw UsageError("classify: expected categorical cell");
            if (row[i].category_index() >= static_cast<int>(attrs[i].values.size()))
                throw UsageError("classify: categorical value index out of range");
        } else if (!row[i].is_number()) {
            throw UsageError("classify: expected continuous cell");
        }
    }

    const TreeNode* node = &tree.root;
    while (!node->is_leaf()) {
        const Cell& cell = row[static_cast<std::size_t>(node->attribute)];
        std::size_t next = static_cast<std::size_t>(node->majority_branch);
        if (!cell.is_missing()) {
            if (node->threshold.has_value()) {
                next = cell.value() <= *node->threshold ? 0 : 1;
            } else {
                for (std::size_t b = 0; b < node->branch_values.size(); ++b) {
                    if (node->branch_values[b] == cell.category_index()) {
                        next = b;
                        break;
                    }
                }
                // value unseen in training: stays on the majority branch
            }
        }
        node = &node->branches[next];
    }

    double total = 0.0, best = 0.0;
    for (double c : node->class_counts) {
        total += c;
        best = std::max(best, c);
    }
    return Classification{node->label, total > 0.0 ? best / total : 1.0};
}

bool is_sufficiently_trained(std::size_t store_size, double holdout_accuracy,
                             const SufficiencyParams& params) {
    return store_size >= params.min_rows && holdout_accuracy >= params.min_accuracy;
}

}  // namespace cosmos::dtree
