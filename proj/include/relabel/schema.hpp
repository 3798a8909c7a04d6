#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace relabel {

struct AttributeSpec {
    std::string name;
    std::string class_name;   // mutually exclusive group this attribute belongs to
    std::string category;     // display grouping only, may be empty
    int num_classes = 2;      // binary attributes: 2
};

// Ordered attribute list plus the partition into mutually exclusive classes.
// The attribute order fixes column order everywhere downstream.
class AttributeSchema {
public:
    AttributeSchema() = default;

    // Validates: unique non-empty names, non-empty class names, num_classes >= 2,
    // no commas/newlines in any name (they travel through CSV headers).
    static AttributeSchema from_specs(std::vector<AttributeSpec> specs);

    static AttributeSchema load_json(const std::string& path);
    void save_json(const std::string& path) const;

    std::size_t size() const { return attrs_.size(); }
    const AttributeSpec& attribute(std::size_t i) const { return attrs_[i]; }
    const std::vector<AttributeSpec>& attributes() const { return attrs_; }

    std::optional<std::size_t> index_of(std::string_view name) const;

    // Class groups as attribute-index lists, in order of first appearance.
    const std::vector<std::vector<std::size_t>>& class_groups() const { return class_groups_; }

    // FNV-1a over the canonical textual form; stored in model files so a model
    // is never applied against a different schema.
    std::uint64_t hash() const;

    bool same_layout(const AttributeSchema& other) const;

private:
    std::vector<AttributeSpec> attrs_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> class_groups_;
};

}  // namespace relabel
