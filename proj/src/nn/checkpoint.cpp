#include "gnnrx/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace gnnrx::nn {

namespace {

template <typename T>
void put_le(std::ostream& out, T v)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    U u = std::bit_cast<U>(v);
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFFu);
    }
    out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename T>
bool get_le(std::istream& in, T& v)
{
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    unsigned char buf[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) {
        return false;
    }
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        u |= static_cast<U>(buf[i]) << (8 * i);
    }
    v = std::bit_cast<T>(u);
    return true;
}

} // namespace

NamedArray to_named_array(std::string name, const Matrix& m)
{
    NamedArray a;
    a.name = std::move(name);
    a.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    a.data.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            a.data.push_back(m(r, c));
        }
    }
    return a;
}

Matrix to_matrix(const NamedArray& a)
{
    Index rows = 1;
    Index cols = 1;
    if (a.dims.size() == 1) {
        rows = static_cast<Index>(a.dims[0]);
    } else if (a.dims.size() == 2) {
        rows = static_cast<Index>(a.dims[0]);
        cols = static_cast<Index>(a.dims[1]);
    } else if (!a.dims.empty()) {
        throw CheckpointError("array '" + a.name + "' has rank > 2");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = a.data.at(k++);
        }
    }
    return m;
}

void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& arrays)
{
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_le(out, kCheckpointVersion);
    for (const auto& a : arrays) {
        const std::uint64_t expect = std::accumulate(a.dims.begin(), a.dims.end(), std::uint64_t{1},
                                                     std::multiplies<>());
        if (expect != a.data.size()) {
            throw CheckpointError("array '" + a.name + "' payload does not match its dims");
        }
        put_le(out, static_cast<std::uint32_t>(a.name.size()));
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        put_le(out, static_cast<std::uint32_t>(a.dims.size()));
        for (auto d : a.dims) {
            put_le(out, d);
        }
        for (double v : a.data) {
            put_le(out, v);
        }
    }
    if (!out) {
        throw CheckpointError("write failed");
    }
}

std::vector<NamedArray> read_checkpoint(std::istream& in)
{
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw CheckpointError("not a checkpoint (bad magic)");
    }
    std::uint32_t version = 0;
    if (!get_le(in, version) || version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    std::vector<NamedArray> arrays;
    while (in.peek() != std::char_traits<char>::eof()) {
        NamedArray a;
        std::uint32_t len = 0;
        if (!get_le(in, len)) {
            throw CheckpointError("truncated entry header");
        }
        a.name.resize(len);
        if (!in.read(a.name.data(), len)) {
            throw CheckpointError("truncated entry name");
        }
        std::uint32_t rank = 0;
        if (!get_le(in, rank)) {
            throw CheckpointError("truncated rank for '" + a.name + "'");
        }
        std::uint64_t count = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            std::uint64_t d = 0;
            if (!get_le(in, d)) {
                throw CheckpointError("truncated dims for '" + a.name + "'");
            }
            a.dims.push_back(d);
            count *= d;
        }
        a.data.resize(count);
        for (auto& v : a.data) {
            if (!get_le(in, v)) {
                throw CheckpointError("truncated payload for '" + a.name + "'");
            }
        }
        arrays.push_back(std::move(a));
    }
    return arrays;
}

std::vector<NamedArray> pack_training_state(const ParameterSet& params, const AdamState* adam)
{
    std::vector<NamedArray> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        out.push_back(to_named_array(params.name(i), params.value(i)));
    }
    if (adam != nullptr) {
        NamedArray step;
        step.name = "adam.step";
        step.data = {static_cast<double>(adam->step_count)};
        out.push_back(step);
        for (std::size_t i = 0; i < params.size(); ++i) {
            out.push_back(to_named_array("adam.m/" + params.name(i), adam->first_moment.at(i)));
            out.push_back(to_named_array("adam.v/" + params.name(i), adam->second_moment.at(i)));
        }
    }
    return out;
}

void unpack_training_state(const std::vector<NamedArray>& arrays, ParameterSet& params, AdamState* adam)
{
    std::unordered_map<std::string, const NamedArray*> by_name;
    for (const auto& a : arrays) {
        by_name[a.name] = &a;
    }
    auto fetch = [&](const std::string& name, const Matrix& like) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw CheckpointError("checkpoint lacks '" + name + "'");
        }
        Matrix m = to_matrix(*it->second);
        if (m.rows() != like.rows() || m.cols() != like.cols()) {
            throw CheckpointError("shape mismatch for '" + name + "'");
        }
        return m;
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        params.value(i) = fetch(params.name(i), params.value(i));
    }
    if (adam != nullptr && by_name.contains("adam.step")) {
        if (adam->first_moment.size() != params.size()) {
            *adam = AdamState::for_parameters(params, adam->learning_rate);
        }
        adam->step_count = static_cast<std::uint64_t>(by_name["adam.step"]->data.at(0));
        for (std::size_t i = 0; i < params.size(); ++i) {
            adam->first_moment[i] = fetch("adam.m/" + params.name(i), params.value(i));
            adam->second_moment[i] = fetch("adam.v/" + params.name(i), params.value(i));
        }
    }
}

void save_checkpoint_file(const std::string& path, const ParameterSet& params, const AdamState* adam)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw CheckpointError("cannot open '" + path + "' for writing");
    }
    write_checkpoint(out, pack_training_state(params, adam));
}

void load_checkpoint_file(const std::string& path, ParameterSet& params, AdamState* adam)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open '" + path + "'");
    }
    unpack_training_state(read_checkpoint(in), params, adam);
}

} // namespace gnnrx::nn
