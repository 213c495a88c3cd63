#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "clseq/synthlang/language.hpp"

namespace clseq::synthlang {

/// One utterance record. Features are either inline (row-major frames x d_in)
/// or a reference to a feature file next to the manifest.
struct ManifestRecord {
    std::string id;
    int lang = -1;
    bool inline_feats = true;
    std::vector<double> feats;  // inline values
    int d_in = 0;
    std::string feats_path;  // used when inline_feats == false
    std::vector<int> tokens;
    int frames = 0;
};

using Manifest = std::vector<ManifestRecord>;

/// Line-delimited JSON, one record per line.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Structural validation only; a malformed line reports its line number.
Manifest read_manifest(const std::filesystem::path& path);

/// Also validates each record against the language: token ids must be in the
/// vocabulary and frame counts within the configured duration bounds.
Manifest read_manifest(const std::filesystem::path& path, const TaskSpec& spec);

/// Raw little-endian feature matrix with a (d_in, frames) header.
void write_feature_file(const std::filesystem::path& path, const numkit::Tensor& features);
numkit::TensorPtr read_feature_file(const std::filesystem::path& path);

Manifest manifest_from_dataset(const Dataset& data, int d_in);
Dataset dataset_from_manifest(const Manifest& manifest, const TaskSpec& spec,
                              const std::filesystem::path& base_dir = {});

}  // namespace clseq::synthlang
