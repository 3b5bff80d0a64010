#pragma once

// RSDUMP01 feature-dump file format.
//
//   offset 0   magic "RSDUMP01" (8 bytes)
//   offset 8   header length H, uint64 little-endian
//   offset 16  UTF-8 JSON header (H bytes):
//                {"arrays": [{"name", "dtype", "shape", "offset"}...],
//                 "format": "RSDUMP01", "meta": {string: string}}
//              "offset" is an absolute file offset, always a multiple of 64.
//   ...        zero padding up to the next 64-byte boundary
//   arrays     raw little-endian payloads, row-major, each starting on a
//              64-byte boundary (zero padded between arrays)
//
// dtypes: "f32" for features, weight, bias, perturbed_features, logits,
// class_centers; "u32" for labels.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "repspace/head.hpp"
#include "repspace/matrix.hpp"

namespace repspace {

inline constexpr char kDumpMagic[8] = {'R', 'S', 'D', 'U', 'M', 'P', '0', '1'};
inline constexpr std::size_t kDumpAlignment = 64;
/// Allowed max-abs disagreement between stored logits and W f + b.
inline constexpr double kLogitTolerance = 1e-4;

/// Features, labels and classifier head of one model on one dataset.
/// Arrays are kept at their on-disk f32 precision; analysis code promotes
/// to double through the accessors.
struct FeatureDump {
    Matrix<float> features;  // [N x D]
    std::vector<std::uint32_t> labels;  // [N]
    Matrix<float> weight;  // [C x D]
    std::vector<float> bias;  // [C]
    std::optional<Matrix<float>> perturbed_features;  // [N x D]
    std::optional<Matrix<float>> logits;  // [N x C]
    std::optional<Matrix<float>> class_centers;  // [C x D]
    std::map<std::string, std::string> meta;

    std::size_t num_samples() const noexcept { return features.rows(); }
    std::size_t dim() const noexcept { return features.cols(); }
    std::size_t num_classes() const noexcept { return weight.rows(); }

    ClassifierHead head() const;
    std::vector<double> feature(std::size_t i) const;
    std::vector<double> perturbed(std::size_t i) const;

    /// Throws ErrorKind::invariant / dimension when any invariant fails,
    /// including the logits cross-check.
    void validate() const;

    bool operator==(const FeatureDump&) const = default;
};

/// Builds a dump from double-precision inputs, rounding to f32.
FeatureDump make_dump(const Matrix<double>& features, std::vector<std::uint32_t> labels,
                      const ClassifierHead& head);

/// Computes logits from the (f32) dump arrays in double and stores them as f32.
Matrix<float> compute_logits(const FeatureDump& dump);

std::vector<std::uint8_t> encode_dump(const FeatureDump& dump);
FeatureDump decode_dump(const std::vector<std::uint8_t>& bytes);

void write_dump(const FeatureDump& dump, const std::filesystem::path& path);
FeatureDump read_dump(const std::filesystem::path& path);

}  // namespace repspace
