#pragma once

#include <filesystem>
#include <string>

namespace httplib {
class Server;
}

namespace notesplit {

class MappingService;

/// Registers the JSON API under /api on `server`. When `static_dir` is not
/// empty it is mounted at "/" for the browser frontend.
void register_mapping_routes(httplib::Server& server, MappingService& service,
                             const std::filesystem::path& static_dir = {});

}  // namespace notesplit
