#include "repspace/dumpfmt.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "repspace/geometry.hpp"

namespace repspace {

namespace {

static_assert(std::endian::native == std::endian::little,
              "RSDUMP01 I/O assumes a little-endian host");

using json = nlohmann::json;

std::size_t align_up(std::size_t n) {
    return (n + kDumpAlignment - 1) / kDumpAlignment * kDumpAlignment;
}

struct ArraySpec {
    std::string name;
    std::string dtype;
    std::vector<std::uint64_t> shape;
    std::size_t offset = 0;
    const void* data = nullptr;

    std::size_t bytes() const {
        std::size_t n = 4;
        for (auto s : shape) n *= s;
        return n;
    }
};

void check_finite(const Matrix<float>& m, const std::string& name) {
    for (float v : m.values())
        require(std::isfinite(v), ErrorKind::invariant, name + " contains NaN/Inf");
}

template <typename T>
std::vector<T> read_array(const std::vector<std::uint8_t>& bytes, const json& entry,
                          std::size_t count) {
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t length = count * sizeof(T);
    require(offset % kDumpAlignment == 0, ErrorKind::format,
            "array '" + entry.at("name").get<std::string>() + "' is not 64-byte aligned");
    require(offset <= bytes.size() && length <= bytes.size() - offset, ErrorKind::format,
            "array '" + entry.at("name").get<std::string>() + "' is truncated");
    std::vector<T> out(count);
    if (length > 0) std::memcpy(out.data(), bytes.data() + offset, length);
    return out;
}

}  // namespace

ClassifierHead FeatureDump::head() const {
    return {weight.cast<double>(), to_f64<float>(bias)};
}

std::vector<double> FeatureDump::feature(std::size_t i) const { return to_f64(features.row(i)); }

std::vector<double> FeatureDump::perturbed(std::size_t i) const {
    require(perturbed_features.has_value(), ErrorKind::usage, "dump has no perturbed features");
    return to_f64(perturbed_features->row(i));
}

void FeatureDump::validate() const {
    const std::size_t n = num_samples();
    const std::size_t d = dim();
    const std::size_t c = num_classes();
    require(n >= 1, ErrorKind::invariant, "dump must hold at least one sample");
    require(d >= 1, ErrorKind::invariant, "feature dimension must be at least 1");
    require(c >= 2, ErrorKind::invariant, "dump must have at least two classes");
    require(labels.size() == n, ErrorKind::dimension, "label count != feature rows");
    require(weight.cols() == d, ErrorKind::dimension, "head weight columns != feature dim");
    require(bias.size() == c, ErrorKind::dimension, "head bias length != class count");
    for (std::size_t i = 0; i < n; ++i)
        require(labels[i] < c, ErrorKind::invariant,
                "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                    " is not below class count " + std::to_string(c));
    check_finite(features, "features");
    check_finite(weight, "head weight");
    for (float b : bias) require(std::isfinite(b), ErrorKind::invariant, "head bias contains NaN/Inf");
    if (perturbed_features) {
        require(perturbed_features->rows() == n && perturbed_features->cols() == d,
                ErrorKind::dimension, "perturbed_features shape differs from features");
        check_finite(*perturbed_features, "perturbed_features");
    }
    if (class_centers) {
        require(class_centers->rows() == c && class_centers->cols() == d, ErrorKind::dimension,
                "class_centers must be [C x D]");
        check_finite(*class_centers, "class_centers");
    }
    if (logits) {
        require(logits->rows() == n && logits->cols() == c, ErrorKind::dimension,
                "logits must be [N x C]");
        const auto h = head();
        for (std::size_t i = 0; i < n; ++i) {
            const auto z = repspace::logits(h, feature(i));
            for (std::size_t k = 0; k < c; ++k) {
                const double diff = std::abs(static_cast<double>((*logits)(i, k)) - z[k]);
                require(diff <= kLogitTolerance, ErrorKind::format,
                        "stored logits disagree with W f + b at row " + std::to_string(i) +
                            ", class " + std::to_string(k) + " (|diff| = " +
                            std::to_string(diff) + ")");
            }
        }
    }
}

FeatureDump make_dump(const Matrix<double>& features, std::vector<std::uint32_t> labels,
                      const ClassifierHead& head) {
    FeatureDump dump;
    dump.features = features.cast<float>();
    dump.labels = std::move(labels);
    dump.weight = head.weight.cast<float>();
    dump.bias.assign(head.bias.begin(), head.bias.end());
    return dump;
}

Matrix<float> compute_logits(const FeatureDump& dump) {
    const auto h = dump.head();
    Matrix<float> out(dump.num_samples(), dump.num_classes());
    for (std::size_t i = 0; i < dump.num_samples(); ++i) {
        const auto z = logits(h, dump.feature(i));
        for (std::size_t k = 0; k < z.size(); ++k) out(i, k) = static_cast<float>(z[k]);
    }
    return out;
}

std::vector<std::uint8_t> encode_dump(const FeatureDump& dump) {
    dump.validate();

    std::vector<ArraySpec> arrays;
    auto add_matrix = [&](const std::string& name, const Matrix<float>& m) {
        arrays.push_back({name, "f32", {m.rows(), m.cols()}, 0, m.values().data()});
    };
    add_matrix("features", dump.features);
    arrays.push_back({"labels", "u32", {dump.labels.size()}, 0, dump.labels.data()});
    add_matrix("weight", dump.weight);
    arrays.push_back({"bias", "f32", {dump.bias.size()}, 0, dump.bias.data()});
    if (dump.perturbed_features) add_matrix("perturbed_features", *dump.perturbed_features);
    if (dump.logits) add_matrix("logits", *dump.logits);
    if (dump.class_centers) add_matrix("class_centers", *dump.class_centers);

    // Offsets depend on the header length, which depends on the offsets'
    // digit counts; iterate until the layout is stable.
    std::string header_text;
    std::size_t data_start = 0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        std::size_t cursor = data_start;
        json entries = json::array();
        for (auto& a : arrays) {
            a.offset = cursor;
            entries.push_back({{"name", a.name}, {"dtype", a.dtype}, {"shape", a.shape},
                               {"offset", a.offset}});
            cursor = align_up(cursor + a.bytes());
        }
        json header = {{"format", "RSDUMP01"}, {"arrays", entries}, {"meta", dump.meta}};
        header_text = header.dump();
        const std::size_t needed = align_up(16 + header_text.size());
        if (needed <= data_start) break;
        data_start = needed;
    }

    std::size_t total = data_start;
    for (const auto& a : arrays) total = align_up(a.offset + a.bytes());
    std::vector<std::uint8_t> out(total, 0);
    std::memcpy(out.data(), kDumpMagic, 8);
    const std::uint64_t header_len = header_text.size();
    std::memcpy(out.data() + 8, &header_len, 8);
    std::memcpy(out.data() + 16, header_text.data(), header_text.size());
    for (const auto& a : arrays)
        if (a.bytes() > 0) std::memcpy(out.data() + a.offset, a.data, a.bytes());
    return out;
}

FeatureDump decode_dump(const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() >= 16, ErrorKind::format, "file too short for an RSDUMP01 header");
    require(std::memcmp(bytes.data(), kDumpMagic, 8) == 0, ErrorKind::format,
            "bad magic: not an RSDUMP01 file");
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 8, 8);
    require(header_len <= bytes.size() - 16, ErrorKind::format, "header length exceeds file size");

    json header;
    try {
        header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, std::string("header is not valid JSON: ") + e.what());
    }

    FeatureDump dump;
    std::map<std::string, json> entries;
    try {
        for (const auto& entry : header.at("arrays")) entries[entry.at("name").get<std::string>()] = entry;
        if (header.contains("meta"))
            dump.meta = header.at("meta").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, std::string("malformed header: ") + e.what());
    }

    auto shape_of = [&](const json& entry) {
        return entry.at("shape").get<std::vector<std::size_t>>();
    };
    auto load_matrix = [&](const std::string& name) -> std::optional<Matrix<float>> {
        auto it = entries.find(name);
        if (it == entries.end()) return std::nullopt;
        require(it->second.at("dtype") == "f32", ErrorKind::format, name + " must be f32");
        const auto shape = shape_of(it->second);
        require(shape.size() == 2, ErrorKind::format, name + " must be 2-dimensional");
        return Matrix<float>(shape[0], shape[1],
                             read_array<float>(bytes, it->second, shape[0] * shape[1]));
    };
    auto load_vector = [&](const std::string& name, const std::string& dtype) {
        auto it = entries.find(name);
        require(it != entries.end(), ErrorKind::format, "missing required array '" + name + "'");
        require(it->second.at("dtype") == dtype, ErrorKind::format, name + " must be " + dtype);
        const auto shape = shape_of(it->second);
        require(shape.size() == 1, ErrorKind::format, name + " must be 1-dimensional");
        return shape[0];
    };

    try {
        auto features = load_matrix("features");
        auto weight = load_matrix("weight");
        require(features.has_value() && weight.has_value(), ErrorKind::format,
                "missing required array 'features' or 'weight'");
        dump.features = std::move(*features);
        dump.weight = std::move(*weight);
        const auto n_labels = load_vector("labels", "u32");
        dump.labels = read_array<std::uint32_t>(bytes, entries["labels"], n_labels);
        const auto n_bias = load_vector("bias", "f32");
        dump.bias = read_array<float>(bytes, entries["bias"], n_bias);
        dump.perturbed_features = load_matrix("perturbed_features");
        dump.logits = load_matrix("logits");
        dump.class_centers = load_matrix("class_centers");
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, std::string("malformed array entry: ") + e.what());
    }

    dump.validate();
    return dump;
}

void write_dump(const FeatureDump& dump, const std::filesystem::path& path) {
    const auto bytes = encode_dump(dump);  // validates before touching the file
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorKind::io, "write failed: " + path.string());
}

FeatureDump read_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_dump(bytes);
}

}  // namespace repspace
