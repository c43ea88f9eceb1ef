#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stackcompat/common.hpp"
#include "stackcompat/version.hpp"

namespace stackcompat {

/// The five layers of a deep-learning software/hardware stack.
enum class Layer { library, runtime, driver, os_container, hardware };

inline constexpr std::array<Layer, 5> kAllLayers = {Layer::library, Layer::runtime, Layer::driver,
                                                    Layer::os_container, Layer::hardware};

inline std::string_view to_string(Layer layer) {
  switch (layer) {
    case Layer::library: return "library";
    case Layer::runtime: return "runtime";
    case Layer::driver: return "driver";
    case Layer::os_container: return "os_container";
    case Layer::hardware: return "hardware";
  }
  return "library";
}

inline std::optional<Layer> parse_layer(std::string_view s) {
  for (auto l : kAllLayers)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

struct ComponentEntry {
  std::string id;
  Layer layer = Layer::library;
  std::vector<std::string> aliases;  // lowercase; always contains id
};

/// A stack component bound to a version. Node identity is
/// (component_id, normalized version); the layer is an attribute.
struct VersionedComponent {
  std::string component_id;
  Layer layer = Layer::library;
  Version version;

  std::string version_string() const { return version.normalized(); }
  std::string key() const { return component_id + " " + version.normalized(); }

  friend bool operator==(const VersionedComponent& a, const VersionedComponent& b) {
    return a.component_id == b.component_id && a.version == b.version;
  }
  /// Canonical order: lexicographic by (component_id, normalized version).
  friend bool operator<(const VersionedComponent& a, const VersionedComponent& b) {
    if (a.component_id != b.component_id) return a.component_id < b.component_id;
    return a.version.normalized() < b.version.normalized();
  }
};

/// Rebuilds the version from its normalized text so that raw spellings
/// ("v1.13") do not leak into stored nodes.
inline VersionedComponent canonical(VersionedComponent vc) {
  vc.version = normalize_version(vc.version.normalized());
  return vc;
}

class Dictionary {
 public:
  Dictionary() = default;

  explicit Dictionary(std::vector<ComponentEntry> entries) {
    if (entries.empty()) throw data_error("component dictionary is empty");
    for (auto& e : entries) {
      e.id = to_lower(trim(e.id));
      if (e.id.empty()) throw data_error("component entry with empty id");
      if (by_id_.count(e.id)) throw data_error("duplicate component id: " + e.id);
      for (auto& a : e.aliases) a = to_lower(trim(a));
      std::erase_if(e.aliases, [](const std::string& a) { return a.empty(); });
      if (std::find(e.aliases.begin(), e.aliases.end(), e.id) == e.aliases.end())
        e.aliases.insert(e.aliases.begin(), e.id);
      const auto index = entries_.size();
      by_id_[e.id] = index;
      for (const auto& a : e.aliases) {
        auto [it, inserted] = by_alias_.emplace(a, index);
        if (!inserted && it->second != index)
          throw data_error("alias '" + a + "' maps to both " + entries_[it->second].id + " and " + e.id);
      }
      entries_.push_back(std::move(e));
    }
  }

  static Dictionary from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw data_error("dictionary must be a list of {id, layer, aliases}");
    std::vector<ComponentEntry> entries;
    for (const auto& item : j) {
      ComponentEntry e;
      try {
        e.id = item.at("id").get<std::string>();
        auto layer = parse_layer(item.at("layer").get<std::string>());
        if (!layer) throw data_error("unknown layer for component " + e.id);
        e.layer = *layer;
        if (item.contains("aliases")) e.aliases = item.at("aliases").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception& ex) {
        throw data_error(std::string("malformed dictionary entry: ") + ex.what());
      }
      entries.push_back(std::move(e));
    }
    return Dictionary(std::move(entries));
  }

  static Dictionary load(const std::string& path) {
    const auto text = read_file(path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& ex) {
      throw data_error("dictionary " + path + ": " + ex.what());
    }
    return from_json(j);
  }

  const std::vector<ComponentEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

  const ComponentEntry* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }

  /// Case-insensitive alias lookup.
  const ComponentEntry* resolve(std::string_view name) const {
    auto it = by_alias_.find(to_lower(trim(name)));
    return it == by_alias_.end() ? nullptr : &entries_[it->second];
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.id);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<ComponentEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::size_t> by_alias_;
};

}  // namespace stackcompat
