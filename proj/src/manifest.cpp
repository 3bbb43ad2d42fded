#include "malq/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "malq/graph.hpp"

namespace malq {

std::string manifest_to_json(const RunManifest& manifest) {
    nlohmann::ordered_json doc;
    doc["tool_version"] = manifest.tool_version;
    doc["command"] = manifest.command;
    doc["argv"] = manifest.argv;
    doc["graph_file"] = manifest.graph_file;
    doc["config_values"] = manifest.config_values;
    doc["seeds"] = manifest.seeds;
    doc["output_paths"] = manifest.output_paths;
    return doc.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    RunManifest manifest;
    try {
        manifest.tool_version = doc.at("tool_version").get<std::string>();
        manifest.command = doc.at("command").get<std::string>();
        manifest.argv = doc.at("argv").get<std::vector<std::string>>();
        manifest.graph_file = doc.at("graph_file").get<std::string>();
        manifest.config_values = doc.at("config_values");
        manifest.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        manifest.output_paths = doc.at("output_paths").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("manifest is missing required fields: ") + e.what());
    }
    return manifest;
}

std::string manifest_path_for(const std::string& output_path) {
    return output_path + ".manifest.json";
}

void atomic_write_file(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace malq
