#include "storyframe/resources.hpp"

#include <string>

#include "storyframe/error.hpp"

namespace storyframe {

Resource resource(std::string_view file_name) {
  for (const auto& [name, content] : detail::embedded_resources()) {
    if (name != file_name) continue;
    Resource r{name, {}, content};
    if (content.starts_with("# ")) {
      const auto eol = content.find('\n');
      const std::string_view header = content.substr(2, eol - 2);
      const auto space = header.rfind(' ');
      if (space != std::string_view::npos && header.substr(space + 1).starts_with('v')) {
        r.version = header;
        r.text = eol == std::string_view::npos ? std::string_view{} : content.substr(eol + 1);
      }
    }
    // Resource files end with a newline; prompt text does not carry it.
    while (r.text.ends_with('\n')) r.text.remove_suffix(1);
    return r;
  }
  throw Error(Errc::NotFound, "no bundled resource named " + std::string(file_name));
}

}  // namespace storyframe
