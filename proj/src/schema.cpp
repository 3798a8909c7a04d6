#include "relabel/schema.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"

namespace relabel {

namespace {
void check_name(const std::string& value, const char* what) {
    if (value.empty()) throw_config(std::string(what) + " must not be empty");
    if (value.find(',') != std::string::npos || value.find('\n') != std::string::npos)
        throw_config(std::string(what) + " '" + value + "' contains a comma or newline");
}
}  // namespace

AttributeSchema AttributeSchema::from_specs(std::vector<AttributeSpec> specs) {
    if (specs.empty()) throw_config("schema has no attributes");
    AttributeSchema schema;
    std::map<std::string, std::size_t> class_order;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const AttributeSpec& spec = specs[i];
        check_name(spec.name, "attribute name");
        check_name(spec.class_name, "class name");
        if (spec.num_classes < 2)
            throw_config("attribute '" + spec.name + "' has num_classes < 2");
        if (!schema.index_.emplace(spec.name, i).second)
            throw_config("duplicate attribute name '" + spec.name + "'");
        auto it = class_order.find(spec.class_name);
        if (it == class_order.end()) {
            class_order.emplace(spec.class_name, schema.class_groups_.size());
            schema.class_groups_.push_back({i});
        } else {
            schema.class_groups_[it->second].push_back(i);
        }
    }
    schema.attrs_ = std::move(specs);
    return schema;
}

AttributeSchema AttributeSchema::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_data("cannot open schema file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw_data("schema parse error in " + path + ": " + e.what());
    }
    if (!doc.is_array()) throw_data("schema file must be a JSON array: " + path);
    std::vector<AttributeSpec> specs;
    for (const auto& item : doc) {
        AttributeSpec spec;
        try {
            spec.name = item.at("name").get<std::string>();
            spec.class_name = item.at("class").get<std::string>();
            spec.category = item.value("category", std::string{});
            spec.num_classes = item.value("num_classes", 2);
        } catch (const nlohmann::json::exception& e) {
            throw_data("schema entry malformed in " + path + ": " + e.what());
        }
        specs.push_back(std::move(spec));
    }
    try {
        return from_specs(std::move(specs));
    } catch (const Error& e) {
        throw_data("invalid schema in " + path + ": " + e.what());
    }
}

void AttributeSchema::save_json(const std::string& path) const {
    nlohmann::json doc = nlohmann::json::array();
    for (const AttributeSpec& spec : attrs_) {
        doc.push_back({{"name", spec.name},
                       {"class", spec.class_name},
                       {"category", spec.category},
                       {"num_classes", spec.num_classes}});
    }
    csv::atomic_write(path, doc.dump(2) + "\n");
}

std::optional<std::size_t> AttributeSchema::index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t AttributeSchema::hash() const {
    std::string canon;
    for (const AttributeSpec& spec : attrs_) {
        canon += spec.name;
        canon += '|';
        canon += spec.class_name;
        canon += '|';
        canon += std::to_string(spec.num_classes);
        canon += '\n';
    }
    return csv::fnv1a64(canon);
}

bool AttributeSchema::same_layout(const AttributeSchema& other) const {
    return hash() == other.hash();
}

}  // namespace relabel
