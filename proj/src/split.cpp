#include "relabel/split.hpp"

#include <algorithm>
#include <cmath>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"
#include "relabel/rng.hpp"

namespace relabel {

SubjectSplit split_subject_exclusive(const AnnotatedDataset& dataset, double train_fraction,
                                     std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw_config("train_fraction must be in (0,1)");

    std::vector<std::string> subjects;
    {
        std::unordered_set<std::string> seen;
        for (const Sample& s : dataset.samples)
            if (seen.insert(s.subject_id).second) subjects.push_back(s.subject_id);
    }
    if (subjects.size() < 2) throw_data("subject-exclusive split needs at least 2 subjects");

    std::sort(subjects.begin(), subjects.end());
    Rng rng(seed);
    rng.shuffle(subjects);

    const std::size_t train_count =
        static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(subjects.size())));
    if (train_count == 0 || train_count >= subjects.size())
        throw_data("train_fraction " + std::to_string(train_fraction) + " leaves an empty side for " +
                   std::to_string(subjects.size()) + " subjects");

    SubjectSplit split;
    split.seed = seed;
    split.train_fraction = train_fraction;
    split.train_subjects.assign(subjects.begin(), subjects.begin() + train_count);
    split.test_subjects.assign(subjects.begin() + train_count, subjects.end());
    return split;
}

namespace {
std::vector<std::size_t> indices_in(const AnnotatedDataset& dataset,
                                    const std::vector<std::string>& subjects) {
    std::unordered_set<std::string> wanted(subjects.begin(), subjects.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (wanted.count(dataset.samples[i].subject_id)) out.push_back(i);
    return out;
}
}  // namespace

std::vector<std::size_t> train_indices(const AnnotatedDataset& dataset, const SubjectSplit& split) {
    return indices_in(dataset, split.train_subjects);
}

std::vector<std::size_t> test_indices(const AnnotatedDataset& dataset, const SubjectSplit& split) {
    return indices_in(dataset, split.test_subjects);
}

void save_split(const std::string& path, const SubjectSplit& split,
                const std::string& header_comment) {
    std::string out = header_comment;
    out += "# seed=" + std::to_string(split.seed) +
           " train_fraction=" + csv::format_double(split.train_fraction) + "\n";
    out += "subject_id,part\n";
    for (const std::string& s : split.train_subjects) out += s + ",train\n";
    for (const std::string& s : split.test_subjects) out += s + ",test\n";
    csv::atomic_write(path, out);
}

SubjectSplit load_split(const std::string& path) {
    const csv::File file = csv::read_file(path);
    if (file.header != std::vector<std::string>{"subject_id", "part"})
        throw_data(path + ": expected header subject_id,part");
    SubjectSplit split;
    for (const csv::Row& row : file.rows) {
        if (row.fields.size() != 2)
            throw_data(path + ":" + std::to_string(row.line_number) + ": expected 2 fields");
        if (row.fields[1] == "train")
            split.train_subjects.push_back(row.fields[0]);
        else if (row.fields[1] == "test")
            split.test_subjects.push_back(row.fields[0]);
        else
            throw_data(path + ":" + std::to_string(row.line_number) + ": part must be train or test");
    }
    if (split.train_subjects.empty() || split.test_subjects.empty())
        throw_data(path + ": split has an empty side");
    return split;
}

}  // namespace relabel
