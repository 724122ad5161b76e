#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>
#include <vector>

#include "json.hpp"

namespace wqed {

/// Record of one CLI run. Timestamps live only here, so the data files
/// themselves stay byte-identical across reruns.
struct RunManifest {
    std::string version;
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline nlohmann::ordered_json to_json(const RunManifest& m) {
    return {{"version", m.version},   {"command", m.command}, {"config_hash", m.config_hash},
            {"seed", m.seed},         {"started", m.started}, {"finished", m.finished},
            {"outputs", m.outputs}};
}

}  // namespace wqed
