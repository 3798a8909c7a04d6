#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relabel/matrix.hpp"
#include "relabel/schema.hpp"

namespace relabel {

struct Sample {
    std::string sample_id;
    std::string subject_id;
};

// Immutable after load: embeddings, subject ids, and a tri-state annotation
// matrix aligned to the schema's attribute order.
struct AnnotatedDataset {
    AttributeSchema schema;
    std::vector<Sample> samples;
    Matrix embeddings;             // N x D
    AnnotationMatrix annotations;  // N x K

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return embeddings.cols; }
};

// Continuous scores, one column per attribute; sign carries polarity.
struct ContinuousAnnotations {
    std::vector<std::string> sample_ids;
    Matrix scores;
};

struct EmbeddingTable {
    std::vector<Sample> samples;
    Matrix embeddings;
};

struct AnnotationTable {
    std::vector<std::string> sample_ids;
    AnnotationMatrix annotations;
};

// Loaders reject malformed rows (with line numbers), duplicate sample ids,
// and annotation values outside {-1,0,1}.
EmbeddingTable load_embeddings(const std::string& path);
AnnotationTable load_annotations(const std::string& path, const AttributeSchema& schema);
ContinuousAnnotations load_continuous_annotations(const std::string& path,
                                                  const AttributeSchema& schema);

void save_embeddings(const std::string& path, const std::vector<Sample>& samples,
                     const Matrix& embeddings, const std::string& header_comment = {});
void save_annotations(const std::string& path, const AttributeSchema& schema,
                      const std::vector<std::string>& sample_ids, const AnnotationMatrix& values,
                      const std::string& header_comment = {});
void save_continuous_annotations(const std::string& path, const AttributeSchema& schema,
                                 const std::vector<std::string>& sample_ids, const Matrix& scores,
                                 const std::string& header_comment = {});

// Joins embeddings and annotations on sample_id (embedding-file row order).
// Samples present in only one file are dropped from the join; an empty join is
// a data error. Pass an empty annotations_path to load embeddings only (the
// annotation matrix is then all-undefined).
AnnotatedDataset load_dataset(const std::string& embeddings_path,
                              const std::string& annotations_path,
                              const std::string& schema_path);
AnnotatedDataset load_dataset(const std::string& embeddings_path,
                              const std::string& annotations_path,
                              AttributeSchema schema);

void save_dataset(const std::string& embeddings_path, const std::string& annotations_path,
                  const AnnotatedDataset& dataset, const std::string& header_comment = {});

// True iff every (sample, class) has at most one attribute annotated +1.
bool respects_schema(const AnnotationMatrix& annotations, const AttributeSchema& schema);

// Row subset, preserving order of `rows`.
AnnotatedDataset subset(const AnnotatedDataset& dataset, std::span<const std::size_t> rows);

}  // namespace relabel
