#include "relabel/dataset.hpp"

#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"

namespace relabel {

namespace {

void check_id(const std::string& id, const std::string& path, std::size_t line_number) {
    if (id.empty() || id.find(',') != std::string::npos)
        throw_data(path + ":" + std::to_string(line_number) + ": invalid identifier '" + id + "'");
}

}  // namespace

EmbeddingTable load_embeddings(const std::string& path) {
    const csv::File file = csv::read_file(path);
    if (file.header.size() < 3 || file.header[0] != "sample_id" || file.header[1] != "subject_id")
        throw_data(path + ": expected header sample_id,subject_id,e0,...");
    const std::size_t dim = file.header.size() - 2;

    EmbeddingTable table;
    table.embeddings = Matrix(file.rows.size(), dim);
    std::unordered_set<std::string> seen;
    seen.reserve(file.rows.size());
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        const csv::Row& row = file.rows[r];
        if (row.fields.size() != file.header.size())
            throw_data(path + ":" + std::to_string(row.line_number) + ": expected " +
                       std::to_string(file.header.size()) + " fields, got " +
                       std::to_string(row.fields.size()));
        check_id(row.fields[0], path, row.line_number);
        check_id(row.fields[1], path, row.line_number);
        if (!seen.insert(row.fields[0]).second)
            throw_data(path + ":" + std::to_string(row.line_number) + ": duplicate sample_id '" +
                       row.fields[0] + "'");
        table.samples.push_back({row.fields[0], row.fields[1]});
        for (std::size_t j = 0; j < dim; ++j)
            table.embeddings.at(r, j) = csv::parse_double(row.fields[2 + j], path, row.line_number);
    }
    return table;
}

namespace {

// Shared scaffolding for tri-state and continuous annotation files. Reads the
// file, validates the header against the schema, and feeds cells to `cell`.
template <typename CellFn>
std::vector<std::string> load_annotation_rows(const std::string& path,
                                              const AttributeSchema& schema,
                                              std::size_t* row_count_out, CellFn&& cell) {
    const csv::File file = csv::read_file(path);
    if (file.header.empty() || file.header[0] != "sample_id")
        throw_data(path + ": expected header sample_id,<attributes...>");
    if (file.header.size() != schema.size() + 1)
        throw_data(path + ": header has " + std::to_string(file.header.size() - 1) +
                   " attributes, schema has " + std::to_string(schema.size()));
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (file.header[j + 1] != schema.attribute(j).name)
            throw_data(path + ": column '" + file.header[j + 1] + "' does not match schema attribute '" +
                       schema.attribute(j).name + "'");

    *row_count_out = file.rows.size();
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        const csv::Row& row = file.rows[r];
        if (row.fields.size() != file.header.size())
            throw_data(path + ":" + std::to_string(row.line_number) + ": expected " +
                       std::to_string(file.header.size()) + " fields, got " +
                       std::to_string(row.fields.size()));
        check_id(row.fields[0], path, row.line_number);
        if (!seen.insert(row.fields[0]).second)
            throw_data(path + ":" + std::to_string(row.line_number) + ": duplicate sample_id '" +
                       row.fields[0] + "'");
        ids.push_back(row.fields[0]);
        for (std::size_t j = 0; j < schema.size(); ++j)
            cell(r, j, row.fields[j + 1], row.line_number);
    }
    return ids;
}

}  // namespace

AnnotationTable load_annotations(const std::string& path, const AttributeSchema& schema) {
    AnnotationTable table;
    std::size_t rows = 0;
    std::vector<std::int8_t> cells;
    std::vector<std::string> ids = load_annotation_rows(
        path, schema, &rows,
        [&](std::size_t, std::size_t, const std::string& text, std::size_t line) {
            const int v = csv::parse_int(text, path, line);
            if (!is_tristate(v))
                throw_data(path + ":" + std::to_string(line) + ": annotation value '" + text +
                           "' outside {-1,0,1}");
            cells.push_back(static_cast<std::int8_t>(v));
        });
    table.sample_ids = std::move(ids);
    table.annotations.rows = rows;
    table.annotations.cols = schema.size();
    table.annotations.values = std::move(cells);
    return table;
}

ContinuousAnnotations load_continuous_annotations(const std::string& path,
                                                  const AttributeSchema& schema) {
    ContinuousAnnotations table;
    std::size_t rows = 0;
    std::vector<double> cells;
    std::vector<std::string> ids = load_annotation_rows(
        path, schema, &rows,
        [&](std::size_t, std::size_t, const std::string& text, std::size_t line) {
            const double v = csv::parse_double(text, path, line);
            if (!std::isfinite(v))
                throw_data(path + ":" + std::to_string(line) + ": non-finite score '" + text + "'");
            cells.push_back(v);
        });
    table.sample_ids = std::move(ids);
    table.scores.rows = rows;
    table.scores.cols = schema.size();
    table.scores.data = std::move(cells);
    return table;
}

void save_embeddings(const std::string& path, const std::vector<Sample>& samples,
                     const Matrix& embeddings, const std::string& header_comment) {
    std::string out = header_comment;
    out += "sample_id,subject_id";
    for (std::size_t j = 0; j < embeddings.cols; ++j) out += ",e" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out += samples[i].sample_id;
        out += ',';
        out += samples[i].subject_id;
        for (std::size_t j = 0; j < embeddings.cols; ++j) {
            out += ',';
            out += csv::format_double(embeddings.at(i, j));
        }
        out += '\n';
    }
    csv::atomic_write(path, out);
}

namespace {

std::string annotation_header_line(const AttributeSchema& schema) {
    std::string line = "sample_id";
    for (std::size_t j = 0; j < schema.size(); ++j) {
        line += ',';
        line += schema.attribute(j).name;
    }
    line += '\n';
    return line;
}

}  // namespace

void save_annotations(const std::string& path, const AttributeSchema& schema,
                      const std::vector<std::string>& sample_ids, const AnnotationMatrix& values,
                      const std::string& header_comment) {
    std::string out = header_comment;
    out += annotation_header_line(schema);
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        out += sample_ids[i];
        for (std::size_t j = 0; j < schema.size(); ++j) {
            out += ',';
            out += std::to_string(static_cast<int>(values.at(i, j)));
        }
        out += '\n';
    }
    csv::atomic_write(path, out);
}

void save_continuous_annotations(const std::string& path, const AttributeSchema& schema,
                                 const std::vector<std::string>& sample_ids, const Matrix& scores,
                                 const std::string& header_comment) {
    std::string out = header_comment;
    out += annotation_header_line(schema);
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        out += sample_ids[i];
        for (std::size_t j = 0; j < schema.size(); ++j) {
            out += ',';
            out += csv::format_double(scores.at(i, j));
        }
        out += '\n';
    }
    csv::atomic_write(path, out);
}

AnnotatedDataset load_dataset(const std::string& embeddings_path,
                              const std::string& annotations_path,
                              const std::string& schema_path) {
    return load_dataset(embeddings_path, annotations_path, AttributeSchema::load_json(schema_path));
}

AnnotatedDataset load_dataset(const std::string& embeddings_path,
                              const std::string& annotations_path, AttributeSchema schema) {
    EmbeddingTable emb = load_embeddings(embeddings_path);

    AnnotatedDataset dataset;
    dataset.schema = std::move(schema);

    if (annotations_path.empty()) {
        dataset.samples = std::move(emb.samples);
        dataset.embeddings = std::move(emb.embeddings);
        dataset.annotations = AnnotationMatrix(dataset.samples.size(), dataset.schema.size());
        return dataset;
    }

    const AnnotationTable ann = load_annotations(annotations_path, dataset.schema);
    std::unordered_map<std::string, std::size_t> ann_index;
    ann_index.reserve(ann.sample_ids.size());
    for (std::size_t i = 0; i < ann.sample_ids.size(); ++i) ann_index.emplace(ann.sample_ids[i], i);

    // Inner join on sample_id; embedding-file order wins.
    std::vector<std::size_t> emb_rows, ann_rows;
    for (std::size_t i = 0; i < emb.samples.size(); ++i) {
        auto it = ann_index.find(emb.samples[i].sample_id);
        if (it == ann_index.end()) continue;
        emb_rows.push_back(i);
        ann_rows.push_back(it->second);
    }
    if (emb_rows.empty())
        throw_data("no sample_id appears in both " + embeddings_path + " and " + annotations_path);

    dataset.embeddings = Matrix(emb_rows.size(), emb.embeddings.cols);
    dataset.annotations = AnnotationMatrix(emb_rows.size(), dataset.schema.size());
    for (std::size_t r = 0; r < emb_rows.size(); ++r) {
        dataset.samples.push_back(emb.samples[emb_rows[r]]);
        for (std::size_t j = 0; j < emb.embeddings.cols; ++j)
            dataset.embeddings.at(r, j) = emb.embeddings.at(emb_rows[r], j);
        for (std::size_t j = 0; j < dataset.schema.size(); ++j)
            dataset.annotations.set(r, j, ann.annotations.at(ann_rows[r], j));
    }
    return dataset;
}

void save_dataset(const std::string& embeddings_path, const std::string& annotations_path,
                  const AnnotatedDataset& dataset, const std::string& header_comment) {
    save_embeddings(embeddings_path, dataset.samples, dataset.embeddings, header_comment);
    std::vector<std::string> ids;
    ids.reserve(dataset.samples.size());
    for (const Sample& s : dataset.samples) ids.push_back(s.sample_id);
    save_annotations(annotations_path, dataset.schema, ids, dataset.annotations, header_comment);
}

bool respects_schema(const AnnotationMatrix& annotations, const AttributeSchema& schema) {
    for (std::size_t i = 0; i < annotations.rows; ++i) {
        for (const auto& group : schema.class_groups()) {
            int positives = 0;
            for (std::size_t a : group)
                if (annotations.at(i, a) == 1) ++positives;
            if (positives > 1) return false;
        }
    }
    return true;
}

AnnotatedDataset subset(const AnnotatedDataset& dataset, std::span<const std::size_t> rows) {
    AnnotatedDataset out;
    out.schema = dataset.schema;
    out.embeddings = Matrix(rows.size(), dataset.embeddings.cols);
    out.annotations = AnnotationMatrix(rows.size(), dataset.annotations.cols);
    out.samples.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t src = rows[r];
        out.samples.push_back(dataset.samples[src]);
        for (std::size_t j = 0; j < dataset.embeddings.cols; ++j)
            out.embeddings.at(r, j) = dataset.embeddings.at(src, j);
        for (std::size_t j = 0; j < dataset.annotations.cols; ++j)
            out.annotations.set(r, j, dataset.annotations.at(src, j));
    }
    return out;
}

}  // namespace relabel
