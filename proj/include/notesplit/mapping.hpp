#pragma once

#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "notesplit/titlespace.hpp"

namespace notesplit {

struct OntologyEntry {
  std::string code;
  std::string display;
};

struct Ontology {
  std::vector<OntologyEntry> entries;

  bool contains(const std::string& code) const { return index_.count(code) > 0; }
  /// Throws InvalidArgument on a duplicate code.
  void add(OntologyEntry entry);

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

/// CSV with header code,display.
Ontology load_ontology(const std::filesystem::path& path);

struct Assignment {
  std::size_t title_id = 0;
  std::string code;
  std::string author;
  std::string timestamp;  // UTC, ISO 8601
};

enum class EventKind { assign, unassign };

struct MappingEvent {
  EventKind kind = EventKind::assign;
  std::size_t title_id = 0;
  std::string code;
  std::string author;
  std::string timestamp;
};

nlohmann::json to_json(const MappingEvent& event);
MappingEvent event_from_json(const nlohmann::json& j);

struct MappingState {
  std::map<std::size_t, Assignment> assignments;
  std::vector<MappingEvent> events;

  /// Later assignments supersede earlier ones.
  void apply(const MappingEvent& event);
  static MappingState replay(const std::vector<MappingEvent>& events);
};

/// Append-only JSONL event log. Each append is flushed and fsynced before
/// it returns.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  /// Complete events of a log file. A torn final line (no trailing newline
  /// or unparsable) is ignored; a missing file yields no events.
  static std::vector<MappingEvent> read(const std::filesystem::path& path);

  /// Throws IoError when the event could not be made durable.
  void append(const MappingEvent& event);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
};

using SuggestionScorer = std::function<double(double similarity, std::size_t count)>;

/// similarity × ln(1 + count)
double default_suggestion_score(double similarity, std::size_t count);

struct Suggestion {
  std::size_t id = 0;
  std::string title;
  double similarity = 0.0;
  std::size_t count = 0;
  double score = 0.0;
  std::optional<std::string> code;
};

struct CoverageInfo {
  double coverage = 0.0;
  std::size_t assigned_titles = 0;
  std::size_t total_titles = 0;
};

struct TitleEntry {
  std::size_t id = 0;
  std::string title;
  std::size_t count = 0;
  std::optional<std::string> code;
};

struct TitleQuery {
  enum class Sort { count, id, title };
  Sort sort = Sort::count;
  bool unmapped_only = false;
  std::size_t page = 0;        // 0-based
  std::size_t page_size = 50;
};

struct TitlePage {
  std::vector<TitleEntry> items;
  std::size_t page = 0;
  std::size_t page_size = 0;
  std::size_t total = 0;  // matching titles across all pages
};

/// Computer-assisted ontology fitting: ranks similar frequent titles,
/// records human assignments and reports segment coverage. Mutations are
/// serialized and persisted before they are applied; reads run
/// concurrently.
class MappingService {
 public:
  MappingService(TitleSpace space, Ontology ontology, const std::filesystem::path& log_path,
                 SuggestionScorer scorer = default_suggestion_score);

  /// Throws NotFound for an unknown title id.
  std::vector<Suggestion> suggest(std::size_t title_id, std::size_t n = 15) const;

  /// Throws NotFound for an unknown title or code, IoError when the event
  /// cannot be persisted (state unchanged).
  CoverageInfo assign(std::size_t title_id, const std::string& code, const std::string& author);
  /// Throws NotFound when the title is unknown or not assigned.
  CoverageInfo unassign(std::size_t title_id);

  CoverageInfo coverage() const;
  TitlePage titles(const TitleQuery& query) const;

  const Ontology& ontology() const { return ontology_; }
  const TitleSpace& space() const { return space_; }
  MappingState state() const;

 private:
  CoverageInfo coverage_locked() const;
  void persist_and_apply(const MappingEvent& event);

  TitleSpace space_;
  Matrix unit_vectors_;
  Ontology ontology_;
  SuggestionScorer scorer_;
  std::size_t total_count_ = 0;

  mutable std::shared_mutex mutex_;
  MappingState state_;
  EventLog log_;
};

std::string utc_timestamp();

}  // namespace notesplit
