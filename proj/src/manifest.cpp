#include "bbmlab/manifest.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace bbmlab {

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config_digest"] = config_digest();
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : parameters.values())
        params[k] = v;
    j["parameters"] = params;
    j["seeds"] = seeds;
    j["artifact_version"] = artifact_version;
    j["wall_time_s"] = wall_time_s;
    j["outputs"] = outputs;
    return j.dump(2);
}

void RunManifest::write(const std::string& out_dir) const {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "manifest.json");
    out << to_json() << "\n";
}

std::vector<std::string> audit_orphan_outputs(const std::string& out_dir,
                                              const RunManifest& manifest) {
    namespace fs = std::filesystem;
    std::vector<std::string> orphans;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
        if (!entry.is_regular_file())
            continue;
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json")
            continue;
        bool referenced = false;
        for (const auto& o : manifest.outputs)
            if (o == name) {
                referenced = true;
                break;
            }
        if (!referenced)
            orphans.push_back(name);
    }
    return orphans;
}

} // namespace bbmlab
