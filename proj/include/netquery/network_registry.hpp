// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace netquery {

struct NetworkRegistryEntry {
    std::string network_id;
    std::string display_name;
    std::filesystem::path file_path;
    bool quality_configured = false;
    std::optional<nlohmann::json> element_summary; // node/link/pump/valve counts when known

    nlohmann::json to_json() const;
    static NetworkRegistryEntry from_json(const nlohmann::json& j,
                                          const std::filesystem::path& base_dir);
};

class NetworkRegistry {
public:
    /// Throws ConfigError on a duplicate id or a missing file.
    void add(NetworkRegistryEntry entry);

    const NetworkRegistryEntry* find(std::string_view network_id) const;
    /// Throws NetworkUnknown.
    const NetworkRegistryEntry& at(std::string_view network_id) const;
    const std::vector<NetworkRegistryEntry>& entries() const noexcept { return entries_; }

private:
    std::vector<NetworkRegistryEntry> entries_;
};

} // namespace netquery
