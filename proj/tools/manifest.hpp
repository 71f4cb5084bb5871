#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hsu::cli {

/**
 * Ordered `key = value` text: one entry per line, '#' starts a comment line,
 * keys may repeat (multi-valued options). Used for run manifests and config files.
 */
class Manifest {
public:
    void add(std::string key, std::string value);

    /// Last value stored under `key`.
    std::optional<std::string> get(const std::string& key) const;
    std::vector<std::string> get_all(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::string format() const;
    /// Throws ParseError (1-based line) on a line without '=' or with an empty key.
    static Manifest parse(const std::string& text);

    void save(const std::filesystem::path& path) const;
    static Manifest load(const std::filesystem::path& path);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace hsu::cli
