#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bbmlab/config.hpp"

namespace bbmlab {

// Reproducibility record written next to every command's outputs.
struct RunManifest {
    std::string command;
    Config parameters; // fully resolved (config file + flag overrides)
    std::vector<std::uint64_t> seeds;
    std::string artifact_version;
    double wall_time_s = 0.0;
    std::vector<std::string> outputs; // file names relative to the out dir

    std::string config_digest() const { return parameters.digest(); }
    std::string to_json() const;
    void write(const std::string& out_dir) const; // <out_dir>/manifest.json
};

// Files in out_dir not referenced by the manifest (manifest.json itself
// excluded). A nonempty result fails the post-run audit.
std::vector<std::string> audit_orphan_outputs(const std::string& out_dir,
                                              const RunManifest& manifest);

inline constexpr const char* kArtifactVersion = "0.1.0";

} // namespace bbmlab
