#include "manifest.hpp"

#include "hsu/io.hpp"

#include <fstream>
#include <sstream>

namespace hsu::cli {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

void Manifest::add(std::string key, std::string value)
{
    entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> Manifest::get(const std::string& key) const
{
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->first == key) {
            return it->second;
        }
    }
    return std::nullopt;
}

std::vector<std::string> Manifest::get_all(const std::string& key) const
{
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
        if (k == key) {
            out.push_back(v);
        }
    }
    return out;
}

std::string Manifest::format() const
{
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

Manifest Manifest::parse(const std::string& text)
{
    Manifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key = value", line_no, 1);
        }
        std::string key = trim(t.substr(0, eq));
        if (key.empty()) {
            throw ParseError("empty key", line_no, 1);
        }
        m.add(std::move(key), trim(t.substr(eq + 1)));
    }
    return m;
}

void Manifest::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << format();
}

Manifest Manifest::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

} // namespace hsu::cli
