#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cosmos/dtree.hpp"
#include "cosmos/errors.hpp"
#include "cosmos/strings.hpp"

namespace cosmos::dtree {

namespace {

using nlohmann::json;

Attribute parse_attribute_spec(std::string_view spec) {
    auto colon = spec.find(':');
    if (colon == std::string_view::npos)
        throw ParseError(ParseErrorKind::Malformed, "dataset header: missing ':' in " + std::string(spec));
    Attribute attr;
    attr.name = std::string(trim(spec.substr(0, colon)));
    auto kind = trim(spec.substr(colon + 1));
    if (kind == "CONT") {
        attr.kind = AttrKind::Continuous;
        return attr;
    }
    if (starts_with(kind, "CAT(") && kind.back() == ')') {
        attr.kind = AttrKind::Categorical;
        auto body = kind.substr(4, kind.size() - 5);
        for (const auto& v : split(body, ';')) {
            auto val = trim(v);
            if (val.empty())
                throw ParseError(ParseErrorKind::ValueError,
                                 "dataset header: empty value in " + attr.name);
            attr.values.emplace_back(val);
        }
        return attr;
    }
    throw ParseError(ParseErrorKind::Malformed,
                     "dataset header: unknown kind in " + std::string(spec));
}

std::string attribute_spec(const Attribute& attr) {
    if (attr.kind == AttrKind::Continuous) return attr.name + ":CONT";
    std::string out = attr.name + ":CAT(";
    for (std::size_t i = 0; i < attr.values.size(); ++i) {
        if (i) out += ';';
        out += attr.values[i];
    }
    out += ')';
    return out;
}

Cell parse_cell(const AttributeSchema& schema, int attribute, std::string_view text) {
    auto value = trim(text);
    if (value == "?") return Cell::missing();
    const auto& attr = schema.attributes[static_cast<std::size_t>(attribute)];
    if (attr.kind == AttrKind::Categorical) {
        int idx = schema.value_index(attribute, value);
        if (idx < 0)
            throw ParseError(ParseErrorKind::ValueError, "value '" + std::string(value) +
                                                             "' not declared for " + attr.name);
        return Cell::category(idx);
    }
    auto num = parse_double(value);
    if (!num)
        throw ParseError(ParseErrorKind::ValueError,
                         "bad number '" + std::string(value) + "' for " + attr.name);
    return Cell::number(*num);
}

std::string cell_text(const AttributeSchema& schema, int attribute, const Cell& cell) {
    if (cell.is_missing()) return "?";
    const auto& attr = schema.attributes[static_cast<std::size_t>(attribute)];
    if (attr.kind == AttrKind::Categorical)
        return attr.values[static_cast<std::size_t>(cell.category_index())];
    return format_double(cell.value());
}

json node_to_json(const TreeNode& node) {
    json j;
    if (node.is_leaf()) {
        j["label"] = node.label;
        j["counts"] = node.class_counts;
        return j;
    }
    j["attribute"] = node.attribute;
    j["majority"] = node.majority_branch;
    if (node.threshold) j["threshold"] = *node.threshold;
    if (!node.branch_values.empty()) j["values"] = node.branch_values;
    json children = json::array();
    for (const auto& child : node.branches) children.push_back(node_to_json(child));
    j["children"] = std::move(children);
    return j;
}

TreeNode node_from_json(const json& j) {
    TreeNode node;
    if (j.contains("label")) {
        node.label = j.at("label").get<int>();
        node.class_counts = j.at("counts").get<std::vector<double>>();
        return node;
    }
    node.attribute = j.at("attribute").get<int>();
    node.majority_branch = j.at("majority").get<int>();
    if (j.contains("threshold")) node.threshold = j.at("threshold").get<double>();
    if (j.contains("values")) node.branch_values = j.at("values").get<std::vector<int>>();
    for (const auto& child : j.at("children")) node.branches.push_back(node_from_json(child));
    return node;
}

}  // namespace

Dataset load_dataset(std::istream& in) {
    std::string header;
    int lineno = 0;
    while (true) {
        if (!std::getline(in, header))
            throw ParseError(ParseErrorKind::Malformed, "dataset: missing header line");
        ++lineno;
        if (!header.empty() && header.back() == '\r') header.pop_back();
        auto body = trim(header);
        if (body.empty() || body.front() == '#') continue;
        break;
    }

    auto bar = header.find('|');
    if (bar == std::string::npos)
        throw ParseError(ParseErrorKind::Malformed, "dataset header: missing '|'");

    Dataset data;
    for (const auto& spec : split(std::string_view(header).substr(0, bar), ','))
        data.schema.attributes.push_back(parse_attribute_spec(spec));

    auto label_spec = parse_attribute_spec(std::string_view(header).substr(bar + 1));
    if (label_spec.name != "label" || label_spec.kind != AttrKind::Categorical)
        throw ParseError(ParseErrorKind::Malformed, "dataset header: expected label:CAT(...)");
    data.schema.label_domain = std::move(label_spec.values);
    data.schema.validate();

    std::string line;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        auto fields = split(line, ',');
        if (fields.size() != data.schema.attributes.size() + 1)
            throw ParseError(ParseErrorKind::Malformed,
                             "dataset row " + std::to_string(lineno) + ": wrong field count");
        Row row;
        for (std::size_t i = 0; i < data.schema.attributes.size(); ++i)
            row.cells.push_back(parse_cell(data.schema, static_cast<int>(i), fields[i]));
        auto label = trim(fields.back());
        row.label = data.schema.label_index(label);
        if (row.label < 0)
            throw ParseError(ParseErrorKind::ValueError, "dataset row " + std::to_string(lineno) +
                                                             ": unknown label '" +
                                                             std::string(label) + "'");
        data.rows.push_back(std::move(row));
    }
    return data;
}

Dataset load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open dataset: " + path);
    return load_dataset(in);
}

void save_dataset(const Dataset& data, std::ostream& out) {
    data.schema.validate();
    for (std::size_t i = 0; i < data.schema.attributes.size(); ++i) {
        if (i) out << ',';
        out << attribute_spec(data.schema.attributes[i]);
    }
    Attribute label{"label", AttrKind::Categorical, data.schema.label_domain};
    out << '|' << attribute_spec(label) << '\n';
    for (const auto& row : data.rows) {
        for (std::size_t i = 0; i < row.cells.size(); ++i) {
            if (i) out << ',';
            out << cell_text(data.schema, static_cast<int>(i), row.cells[i]);
        }
        out << ',' << data.schema.label_domain[static_cast<std::size_t>(row.label)] << '\n';
    }
}

std::vector<Cell> parse_row(const AttributeSchema& schema, std::string_view csv) {
    auto fields = split(csv, ',');
    if (fields.size() != schema.attributes.size())
        throw ParseError(ParseErrorKind::Malformed, "row: wrong field count");
    std::vector<Cell> cells;
    cells.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i)
        cells.push_back(parse_cell(schema, static_cast<int>(i), fields[i]));
    return cells;
}

std::string tree_to_json(const DecisionTree& tree) {
    json j;
    j["format"] = "cosmos-tree-v1";
    json attrs = json::array();
    for (const auto& attr : tree.schema.attributes) {
        json a;
        a["name"] = attr.name;
        a["kind"] = attr.kind == AttrKind::Categorical ? "categorical" : "continuous";
        if (attr.kind == AttrKind::Categorical) a["values"] = attr.values;
        attrs.push_back(std::move(a));
    }
    j["schema"]["attributes"] = std::move(attrs);
    j["schema"]["labels"] = tree.schema.label_domain;
    j["trained_on"] = tree.trained_on;
    j["root"] = node_to_json(tree.root);
    return j.dump(2) + "\n";
}

DecisionTree tree_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(ParseErrorKind::Malformed, std::string("model: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "cosmos-tree-v1")
            throw ParseError(ParseErrorKind::SchemaViolation, "model: unknown format tag");
        DecisionTree tree;
        for (const auto& a : j.at("schema").at("attributes")) {
            Attribute attr;
            attr.name = a.at("name").get<std::string>();
            const auto kind = a.at("kind").get<std::string>();
            if (kind == "categorical") {
                attr.kind = AttrKind::Categorical;
                attr.values = a.at("values").get<std::vector<std::string>>();
            } else if (kind == "continuous") {
                attr.kind = AttrKind::Continuous;
            } else {
                throw ParseError(ParseErrorKind::ValueError, "model: unknown attribute kind");
            }
            tree.schema.attributes.push_back(std::move(attr));
        }
        tree.schema.label_domain = j.at("schema").at("labels").get<std::vector<std::string>>();
        tree.schema.validate();
        tree.trained_on = j.at("trained_on").get<std::size_t>();
        tree.root = node_from_json(j.at("root"));
        return tree;
    } catch (const json::exception& e) {
        throw ParseError(ParseErrorKind::SchemaViolation, std::string("model: ") + e.what());
    }
}

void save_model_file(const DecisionTree& tree, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write model: " + path);
    out << tree_to_json(tree);
}

DecisionTree load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open model: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return tree_from_json(buf.str());
}

}  // namespace cosmos::dtree
