// SPDX-License-Identifier: Apache-2.0
#include "netquery/network_registry.hpp"

#include "netquery/error.hpp"

namespace netquery {

nlohmann::json NetworkRegistryEntry::to_json() const {
    nlohmann::json j = {{"network_id", network_id},
                        {"display_name", display_name},
                        {"quality_configured", quality_configured}};
    if (element_summary)
        j["element_summary"] = *element_summary;
    return j;
}

NetworkRegistryEntry NetworkRegistryEntry::from_json(const nlohmann::json& j,
                                                     const std::filesystem::path& base_dir) {
    NetworkRegistryEntry e;
    try {
        e.network_id = j.at("network_id").get<std::string>();
        e.display_name = j.value("display_name", e.network_id);
        std::filesystem::path file = j.at("file").get<std::string>();
        e.file_path = file.is_absolute() ? file : base_dir / file;
        e.quality_configured = j.value("quality_configured", false);
        if (j.contains("element_summary"))
            e.element_summary = j["element_summary"];
    } catch (const nlohmann::json::exception& ex) {
        throw Error(ErrorCode::ConfigError, std::string("network entry: ") + ex.what());
    }
    if (e.network_id.empty())
        throw Error(ErrorCode::ConfigError, "network entry has an empty network_id");
    e.file_path = e.file_path.lexically_normal();
    return e;
}

void NetworkRegistry::add(NetworkRegistryEntry entry) {
    if (find(entry.network_id))
        throw Error(ErrorCode::ConfigError, "network '" + entry.network_id + "' registered twice");
    if (!std::filesystem::is_regular_file(entry.file_path))
        throw Error(ErrorCode::ConfigError, "network '" + entry.network_id + "': file " +
                                                entry.file_path.string() + " does not exist");
    entries_.push_back(std::move(entry));
}

const NetworkRegistryEntry* NetworkRegistry::find(std::string_view network_id) const {
    for (const auto& e : entries_) {
        if (e.network_id == network_id)
            return &e;
    }
    return nullptr;
}

const NetworkRegistryEntry& NetworkRegistry::at(std::string_view network_id) const {
    if (const auto* e = find(network_id))
        return *e;
    throw Error(ErrorCode::NetworkUnknown, "network '" + std::string(network_id) + "' is not registered");
}

} // namespace netquery
