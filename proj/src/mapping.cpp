#include "notesplit/mapping.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>

#include <fcntl.h>
#include <unistd.h>

#include "notesplit/csv.hpp"
#include "notesplit/error.hpp"

namespace notesplit {

void Ontology::add(OntologyEntry entry) {
  if (index_.count(entry.code)) throw InvalidArgument("duplicate ontology code '" + entry.code + "'");
  index_.emplace(entry.code, entries.size());
  entries.push_back(std::move(entry));
}

Ontology load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 2 || (*header)[0] != "code" || (*header)[1] != "display")
    throw ParseError(1, "ontology header must be code,display");
  Ontology ontology;
  while (auto row = reader.next()) {
    if (row->size() == 1 && row->front().empty()) continue;
    if (row->size() < 2 || row->front().empty()) throw ParseError(reader.row(), "expected code,display");
    ontology.add({(*row)[0], (*row)[1]});
  }
  return ontology;
}

nlohmann::json to_json(const MappingEvent& event) {
  nlohmann::json j = {{"op", event.kind == EventKind::assign ? "assign" : "unassign"},
                      {"title_id", event.title_id},
                      {"timestamp", event.timestamp}};
  if (event.kind == EventKind::assign) {
    j["code"] = event.code;
    j["author"] = event.author;
  }
  return j;
}

MappingEvent event_from_json(const nlohmann::json& j) {
  MappingEvent e;
  const auto op = j.at("op").get<std::string>();
  if (op == "assign") e.kind = EventKind::assign;
  else if (op == "unassign") e.kind = EventKind::unassign;
  else throw InvalidArgument("unknown event op '" + op + "'");
  e.title_id = j.at("title_id").get<std::size_t>();
  e.timestamp = j.at("timestamp").get<std::string>();
  if (e.kind == EventKind::assign) {
    e.code = j.at("code").get<std::string>();
    e.author = j.at("author").get<std::string>();
  }
  return e;
}

void MappingState::apply(const MappingEvent& event) {
  if (event.kind == EventKind::assign) {
    assignments[event.title_id] = Assignment{event.title_id, event.code, event.author, event.timestamp};
  } else {
    assignments.erase(event.title_id);
  }
  events.push_back(event);
}

MappingState MappingState::replay(const std::vector<MappingEvent>& events) {
  MappingState state;
  for (const auto& e : events) state.apply(e);
  return state;
}

namespace {

struct LogScan {
  std::vector<MappingEvent> events;
  std::size_t valid_bytes = 0;  // prefix holding complete, parsable lines
};

LogScan scan_log(const std::filesystem::path& path) {
  LogScan scan;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return scan;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read event log " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t begin = 0;
  while (begin < content.size()) {
    const auto end = content.find('\n', begin);
    if (end == std::string::npos) break;  // torn tail
    const std::string_view line(content.data() + begin, end - begin);
    begin = end + 1;
    if (!line.empty()) {
      try {
        scan.events.push_back(event_from_json(nlohmann::json::parse(line)));
      } catch (const std::exception&) {
        if (begin >= content.size()) break;
        throw IoError("corrupt event log line in " + path.string());
      }
    }
    scan.valid_bytes = begin;
  }
  return scan;
}

}  // namespace

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  // Drop a torn tail so the next append starts on a fresh line.
  std::error_code ec;
  if (std::filesystem::is_regular_file(path_, ec)) {
    const auto valid = scan_log(path_).valid_bytes;
    if (valid < std::filesystem::file_size(path_)) std::filesystem::resize_file(path_, valid);
  }
  file_ = std::fopen(path_.c_str(), "ab");
  if (!file_) throw IoError("cannot open event log " + path_.string());
}

EventLog::~EventLog() {
  if (file_) std::fclose(file_);
}

std::vector<MappingEvent> EventLog::read(const std::filesystem::path& path) { return scan_log(path).events; }

void EventLog::append(const MappingEvent& event) {
  const std::string line = to_json(event).dump() + "\n";
  const long before = std::ftell(file_);
  const bool ok = std::fwrite(line.data(), 1, line.size(), file_) == line.size() && std::fflush(file_) == 0 &&
                  ::fsync(::fileno(file_)) == 0;
  if (!ok) {
    std::clearerr(file_);
    if (before >= 0 && ::ftruncate(::fileno(file_), before) == 0) std::fseek(file_, 0, SEEK_END);
    throw IoError("failed to persist mapping event to " + path_.string());
  }
}

double default_suggestion_score(double similarity, std::size_t count) {
  return similarity * std::log1p(static_cast<double>(count));
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

MappingService::MappingService(TitleSpace space, Ontology ontology, const std::filesystem::path& log_path,
                               SuggestionScorer scorer)
    : space_(std::move(space)), ontology_(std::move(ontology)), scorer_(std::move(scorer)),
      state_(MappingState::replay(EventLog::read(log_path))), log_(log_path) {
  space_.validate();
  unit_vectors_ = space_.vectors;
  for (Eigen::Index i = 0; i < unit_vectors_.rows(); ++i) {
    const double norm = unit_vectors_.row(i).norm();
    if (norm > 0.0) unit_vectors_.row(i) /= norm;
  }
  total_count_ = std::accumulate(space_.counts.begin(), space_.counts.end(), std::size_t{0});
  for (const auto& [id, a] : state_.assignments)
    if (id >= space_.size()) throw InvalidArgument("event log references unknown title id " + std::to_string(id));
}

std::vector<Suggestion> MappingService::suggest(std::size_t title_id, std::size_t n) const {
  if (title_id >= space_.size()) throw NotFound("unknown title id " + std::to_string(title_id));
  std::shared_lock lock(mutex_);
  const auto query = unit_vectors_.row(static_cast<Eigen::Index>(title_id));
  std::vector<Suggestion> all;
  all.reserve(space_.size());
  for (std::size_t j = 0; j < space_.size(); ++j) {
    if (j == title_id) continue;
    Suggestion s;
    s.id = j;
    s.title = space_.titles[j];
    s.similarity = query.dot(unit_vectors_.row(static_cast<Eigen::Index>(j)));
    s.count = space_.counts[j];
    s.score = scorer_(s.similarity, s.count);
    if (auto it = state_.assignments.find(j); it != state_.assignments.end()) s.code = it->second.code;
    all.push_back(std::move(s));
  }
  std::stable_sort(all.begin(), all.end(), [](const Suggestion& a, const Suggestion& b) { return a.score > b.score; });
  all.resize(std::min(n, all.size()));
  return all;
}

void MappingService::persist_and_apply(const MappingEvent& event) {
  log_.append(event);
  state_.apply(event);
}

CoverageInfo MappingService::assign(std::size_t title_id, const std::string& code, const std::string& author) {
  if (title_id >= space_.size()) throw NotFound("unknown title id " + std::to_string(title_id));
  if (!ontology_.contains(code)) throw NotFound("unknown ontology code '" + code + "'");
  std::unique_lock lock(mutex_);
  persist_and_apply({EventKind::assign, title_id, code, author, utc_timestamp()});
  return coverage_locked();
}

CoverageInfo MappingService::unassign(std::size_t title_id) {
  if (title_id >= space_.size()) throw NotFound("unknown title id " + std::to_string(title_id));
  std::unique_lock lock(mutex_);
  if (!state_.assignments.count(title_id)) throw NotFound("title " + std::to_string(title_id) + " is not assigned");
  persist_and_apply({EventKind::unassign, title_id, {}, {}, utc_timestamp()});
  return coverage_locked();
}

CoverageInfo MappingService::coverage_locked() const {
  CoverageInfo info;
  info.total_titles = space_.size();
  info.assigned_titles = state_.assignments.size();
  std::size_t covered = 0;
  for (const auto& [id, _] : state_.assignments) covered += space_.counts[id];
  info.coverage = total_count_ == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(total_count_);
  return info;
}

CoverageInfo MappingService::coverage() const {
  std::shared_lock lock(mutex_);
  return coverage_locked();
}

TitlePage MappingService::titles(const TitleQuery& query) const {
  if (query.page_size == 0) throw InvalidArgument("page_size must be positive");
  std::shared_lock lock(mutex_);
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < space_.size(); ++i)
    if (!query.unmapped_only || !state_.assignments.count(i)) ids.push_back(i);
  switch (query.sort) {
    case TitleQuery::Sort::count:
      std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return space_.counts[a] > space_.counts[b]; });
      break;
    case TitleQuery::Sort::title:
      std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return space_.titles[a] < space_.titles[b]; });
      break;
    case TitleQuery::Sort::id:
      break;
  }
  TitlePage page;
  page.page = query.page;
  page.page_size = query.page_size;
  page.total = ids.size();
  const std::size_t begin = std::min(ids.size(), query.page * query.page_size);
  const std::size_t end = std::min(ids.size(), begin + query.page_size);
  for (std::size_t k = begin; k < end; ++k) {
    const auto id = ids[k];
    TitleEntry e{id, space_.titles[id], space_.counts[id], std::nullopt};
    if (auto it = state_.assignments.find(id); it != state_.assignments.end()) e.code = it->second.code;
    page.items.push_back(std::move(e));
  }
  return page;
}

MappingState MappingService::state() const {
  std::shared_lock lock(mutex_);
  return state_;
}

}  // namespace notesplit
