#include "notesplit/mapping_http.hpp"

#include <charconv>

#include "notesplit/error.hpp"
#include "notesplit/mapping.hpp"

// after Eigen: <resolv.h> defines a _res macro
#include "httplib.h"
#include "json.hpp"

namespace notesplit {
namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& error, const std::string& detail) {
  send_json(res, status, {{"error", error}, {"detail", detail}});
}

std::size_t parse_index(const std::string& text, const char* name) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw InvalidArgument(std::string("invalid ") + name + " '" + text + "'");
  return value;
}

std::size_t query_index(const httplib::Request& req, const char* name, std::size_t fallback) {
  return req.has_param(name) ? parse_index(req.get_param_value(name), name) : fallback;
}

json coverage_json(const CoverageInfo& c) {
  return {{"coverage", c.coverage}, {"assigned_titles", c.assigned_titles}, {"total_titles", c.total_titles}};
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const NotFound& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const InvalidArgument& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const IoError& e) {
      send_error(res, 500, "persistence_failed", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

void register_mapping_routes(httplib::Server& server, MappingService& service,
                             const std::filesystem::path& static_dir) {
  server.Get("/api/titles", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    TitleQuery q;
    const std::string sort = req.has_param("sort") ? req.get_param_value("sort") : "count";
    if (sort == "count") q.sort = TitleQuery::Sort::count;
    else if (sort == "id") q.sort = TitleQuery::Sort::id;
    else if (sort == "title") q.sort = TitleQuery::Sort::title;
    else throw InvalidArgument("unknown sort '" + sort + "'");
    const std::string unmapped = req.has_param("unmapped") ? req.get_param_value("unmapped") : "all";
    if (unmapped == "only") q.unmapped_only = true;
    else if (unmapped != "all") throw InvalidArgument("unmapped must be only or all");
    q.page = query_index(req, "page", 0);
    q.page_size = query_index(req, "page_size", q.page_size);
    const auto page = service.titles(q);
    json items = json::array();
    for (const auto& e : page.items) {
      json item = {{"id", e.id}, {"title", e.title}, {"count", e.count}};
      if (e.code) item["code"] = *e.code;
      items.push_back(std::move(item));
    }
    send_json(res, 200,
              {{"items", items}, {"page", page.page}, {"page_size", page.page_size}, {"total", page.total}});
  }));

  server.Get(R"(/api/titles/(\d+)/suggest)", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto id = parse_index(req.matches[1], "title id");
    const auto n = query_index(req, "n", 15);
    json out = json::array();
    for (const auto& s : service.suggest(id, n)) {
      json item = {{"id", s.id}, {"title", s.title}, {"similarity", s.similarity}, {"count", s.count},
                   {"score", s.score}};
      if (s.code) item["code"] = *s.code;
      out.push_back(std::move(item));
    }
    send_json(res, 200, out);
  }));

  server.Post("/api/assignments", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    const auto id = body.at("title_id").get<std::size_t>();
    const auto code = body.at("code").get<std::string>();
    const auto author = body.value("author", std::string{});
    send_json(res, 200, coverage_json(service.assign(id, code, author)));
  }));

  server.Delete(R"(/api/assignments/(\d+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, coverage_json(service.unassign(parse_index(req.matches[1], "title id"))));
  }));

  server.Get("/api/coverage", guarded([&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, coverage_json(service.coverage()));
  }));

  server.Get("/api/ontology", guarded([&service](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& e : service.ontology().entries) out.push_back({{"code", e.code}, {"display", e.display}});
    send_json(res, 200, out);
  }));

  if (!static_dir.empty() && !server.set_mount_point("/", static_dir.string()))
    throw IoError("cannot mount static directory " + static_dir.string());
}

}  // namespace notesplit
