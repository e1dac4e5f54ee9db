#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "densesynth/core/error.hpp"
#include "densesynth/study/study.hpp"

namespace densesynth::study {

class DuplicateResponse : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class UnknownStimulus : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

/// Append-only line log. Every append is flushed with fsync before returning.
/// On open, a torn trailing line (no newline) is cut off.
class LineLog {
 public:
  explicit LineLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto last_nl = content.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != content.size()) std::filesystem::resize_file(path_, keep);
    std::size_t start = 0;
    while (start < keep) {
      const auto end = content.find('\n', start);
      lines_.push_back(content.substr(start, end - start));
      start = end + 1;
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open log " + path_.string());
  }
  ~LineLog() {
    if (fd_ >= 0) ::close(fd_);
  }
  LineLog(const LineLog&) = delete;
  LineLog& operator=(const LineLog&) = delete;

  [[nodiscard]] const std::vector<std::string>& lines() const noexcept { return lines_; }

  void append(const std::string& line) {
    const std::string data = line + '\n';
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(fd_, data.data() + off, data.size() - off);
      if (n < 0) throw Error("write failed on " + path_.string());
      off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error("fsync failed on " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::vector<std::string> lines_;
  int fd_ = -1;
};

}  // namespace detail

/// Durable reader-session state for one study: `responses.jsonl` holds every
/// acknowledged answer, `sessions.jsonl` the session index. Lines that fail
/// to parse on reload are skipped.
class ResponseStore {
 public:
  ResponseStore(const StimulusSet& set, const std::filesystem::path& dir)
      : set_(set), responses_(dir / "responses.jsonl"), sessions_(dir / "sessions.jsonl") {
    for (const auto& line : sessions_.lines()) {
      try {
        sessions_seen_.insert(json::parse(line).at("reader").get<std::string>());
      } catch (const std::exception&) {
      }
    }
    for (const auto& line : responses_.lines()) {
      try {
        auto r = response_from_json(json::parse(line));
        if (!set_.find(r.stimulus_id)) continue;
        auto& s = session_locked(r.reader);
        if (s.answered.insert(r.stimulus_id).second) all_.push_back(std::move(r));
      } catch (const std::exception&) {
      }
    }
  }

  struct Progress {
    std::size_t answered = 0;
    std::size_t total = 0;
    std::optional<std::string> next;  // first unanswered stimulus in the reader's order
    [[nodiscard]] bool complete() const noexcept { return answered == total; }
  };

  /// Creates the session on first use; returns the resume point.
  Progress open_session(const std::string& reader) {
    std::lock_guard lock(mu_);
    session_locked(reader);
    if (sessions_seen_.insert(reader).second)
      sessions_.append(json{{"reader", reader}, {"created", utc_timestamp()}}.dump());
    return progress_locked(reader);
  }

  Progress progress(const std::string& reader) {
    std::lock_guard lock(mu_);
    return progress_locked(reader);
  }

  /// Appends durably, then acknowledges.
  Progress record(const std::string& reader, const std::string& stimulus_id, int choice) {
    const double p = choice_to_probability(choice);
    std::lock_guard lock(mu_);  // also orders each session's responses
    auto& s = session_locked(reader);
    if (!set_.find(stimulus_id)) throw UnknownStimulus("unknown stimulus " + stimulus_id);
    if (s.answered.count(stimulus_id)) throw DuplicateResponse("stimulus " + stimulus_id + " already answered");
    StudyResponse r{reader, stimulus_id, choice, p, utc_timestamp()};
    if (sessions_seen_.insert(reader).second)
      sessions_.append(json{{"reader", reader}, {"created", r.timestamp}}.dump());
    responses_.append(response_to_json(r).dump());
    s.answered.insert(stimulus_id);
    all_.push_back(std::move(r));
    return progress_locked(reader);
  }

  [[nodiscard]] std::vector<StudyResponse> responses() const {
    std::lock_guard lock(mu_);
    return all_;
  }

  /// Responses from readers who answered every stimulus.
  [[nodiscard]] std::vector<StudyResponse> completed_responses() const {
    std::lock_guard lock(mu_);
    std::vector<StudyResponse> out;
    for (const auto& r : all_)
      if (by_reader_.at(r.reader).answered.size() == set_.stimuli.size()) out.push_back(r);
    return out;
  }

 private:
  struct Session {
    std::vector<std::string> order;
    std::set<std::string> answered;
  };

  Session& session_locked(const std::string& reader) {
    auto it = by_reader_.find(reader);
    if (it == by_reader_.end()) {
      it = by_reader_.emplace(reader, Session{}).first;
      it->second.order = reader_order(set_, reader);
    }
    return it->second;
  }

  Progress progress_locked(const std::string& reader) {
    auto& s = session_locked(reader);
    Progress p{s.answered.size(), s.order.size(), std::nullopt};
    for (const auto& id : s.order)
      if (!s.answered.count(id)) {
        p.next = id;
        break;
      }
    return p;
  }

  const StimulusSet& set_;
  mutable std::mutex mu_;
  detail::LineLog responses_;
  detail::LineLog sessions_;
  std::set<std::string> sessions_seen_;
  std::map<std::string, Session> by_reader_;
  std::vector<StudyResponse> all_;
};

}  // namespace densesynth::study
