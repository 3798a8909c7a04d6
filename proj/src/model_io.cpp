#include "relabel/model_io.hpp"

#include <cstring>
#include <fstream>

#include "relabel/csv.hpp"
#include "relabel/errors.hpp"

namespace relabel {

namespace {

constexpr char kMagic[8] = {'R', 'L', 'M', 'A', 'C', '0', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

void put_block(std::string& out, const std::vector<double>& v) {
    for (double d : v) put_f64(out, d);
}

class Reader {
public:
    Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }

    void block(std::vector<double>& out, std::size_t count) {
        out.resize(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = f64();
    }

    void raw(char* out, std::size_t count) {
        need(count);
        std::memcpy(out, data_.data() + pos_, count);
        pos_ += count;
    }

    bool exhausted() const { return pos_ == data_.size(); }

private:
    void need(std::size_t count) {
        if (pos_ + count > data_.size()) throw_data("model file truncated: " + path_);
    }
    const std::string& data_;
    std::string path_;
    std::size_t pos_ = 0;
};

void put_bn(std::string& out, const BatchNorm& bn) {
    put_block(out, bn.gamma);
    put_block(out, bn.beta);
    put_block(out, bn.running_mean);
    put_block(out, bn.running_var);
}

void read_bn(Reader& r, BatchNorm& bn, std::size_t width) {
    r.block(bn.gamma, width);
    r.block(bn.beta, width);
    r.block(bn.running_mean, width);
    r.block(bn.running_var, width);
}

}  // namespace

void save_model(const std::string& path, const MacModel& model) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u64(out, model.config.schema.hash());
    put_u64(out, model.config.input_dim);
    put_u64(out, model.config.trunk_width);
    put_u64(out, model.config.branch_width);
    put_u64(out, model.branches.size());
    put_f64(out, model.config.dropout_rate);
    put_f64(out, model.config.bn_epsilon);
    put_f64(out, model.config.bn_momentum);
    for (const Branch& b : model.branches)
        put_u32(out, static_cast<std::uint32_t>(b.output.weight.cols));

    put_block(out, model.trunk.weight.data);
    put_block(out, model.trunk.bias);
    put_bn(out, model.trunk_bn);
    for (const Branch& b : model.branches) {
        put_block(out, b.hidden.weight.data);
        put_block(out, b.hidden.bias);
        put_bn(out, b.hidden_bn);
        put_block(out, b.output.weight.data);
        put_block(out, b.output.bias);
    }
    csv::atomic_write(path, out);
}

MacModel load_model(const std::string& path, const AttributeSchema& schema) {
    std::string data;
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw_data("cannot open model file: " + path);
        data.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    Reader r(data, path);

    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw_data("not a relabel model file (bad magic/version): " + path);

    const std::uint64_t schema_hash = r.u64();
    if (schema_hash != schema.hash())
        throw_data("model schema hash mismatch for " + path +
                   " (model was trained against a different schema)");

    MacModel model;
    model.config.schema = schema;
    model.config.input_dim = r.u64();
    model.config.trunk_width = r.u64();
    model.config.branch_width = r.u64();
    const std::uint64_t num_attrs = r.u64();
    if (num_attrs != schema.size()) throw_data("model attribute count mismatch for " + path);
    model.config.dropout_rate = r.f64();
    model.config.bn_epsilon = r.f64();
    model.config.bn_momentum = r.f64();

    std::vector<std::uint32_t> classes(num_attrs);
    for (auto& c : classes) c = r.u32();
    for (std::size_t a = 0; a < num_attrs; ++a)
        if (classes[a] != static_cast<std::uint32_t>(schema.attribute(a).num_classes))
            throw_data("model class count mismatch for attribute '" + schema.attribute(a).name +
                       "' in " + path);

    model.trunk.weight = Matrix(model.config.input_dim, model.config.trunk_width);
    r.block(model.trunk.weight.data, model.trunk.weight.size());
    r.block(model.trunk.bias, model.config.trunk_width);
    read_bn(r, model.trunk_bn, model.config.trunk_width);

    model.branches.resize(num_attrs);
    for (std::size_t a = 0; a < num_attrs; ++a) {
        Branch& b = model.branches[a];
        b.hidden.weight = Matrix(model.config.trunk_width, model.config.branch_width);
        r.block(b.hidden.weight.data, b.hidden.weight.size());
        r.block(b.hidden.bias, model.config.branch_width);
        read_bn(r, b.hidden_bn, model.config.branch_width);
        b.output.weight = Matrix(model.config.branch_width, classes[a]);
        r.block(b.output.weight.data, b.output.weight.size());
        r.block(b.output.bias, classes[a]);
    }
    if (!r.exhausted()) throw_data("model file has trailing bytes: " + path);
    model.config.validate();
    return model;
}

}  // namespace relabel
