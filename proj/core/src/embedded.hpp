#pragma once

#include <map>
#include <string_view>

namespace cdlgen::detail {

// File name -> contents for data/templates/*.tmpl and data/tasks/*.task.
const std::map<std::string_view, std::string_view>& embedded_files();

}  // namespace cdlgen::detail
