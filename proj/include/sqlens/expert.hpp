#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sqlens/candidate.hpp"
#include "sqlens/vendor_json.hpp"

namespace sqlens {

/// Decoding knobs sent with every completion request. Part of the transcript
/// key, so two calls with the same prompt but different params replay
/// independently.
struct GenerationParams {
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;
};

nlohmann::json params_to_json(const GenerationParams& p);
GenerationParams params_from_json(const nlohmann::json& j);

/// Digest identifying one (prompt, params) request; transcripts are keyed by
/// expert name plus this value.
std::string prompt_fingerprint(const std::string& prompt, const GenerationParams& params);

/// A text-completion backend. Implementations throw Error (Transport,
/// AuthFailure, TranscriptMiss) on failure; they never return partial text.
class Expert {
 public:
  virtual ~Expert() = default;

  virtual const std::string& name() const = 0;
  virtual std::string complete(const std::string& prompt, const GenerationParams& params) = 0;
};

/// Deterministic in-process expert for tests and offline pipelines. Behavior
/// comes from a response function; factories cover the common shapes.
class ScriptedExpert final : public Expert {
 public:
  using Fn = std::function<std::string(const std::string& prompt, const GenerationParams&)>;

  ScriptedExpert(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  /// Always returns the same text.
  static std::unique_ptr<ScriptedExpert> constant(std::string name, std::string text);
  /// Returns the given responses in call order; further calls throw Transport.
  static std::unique_ptr<ScriptedExpert> sequence(std::string name, std::vector<std::string> responses);
  /// Every call throws Transport, for failure-isolation tests.
  static std::unique_ptr<ScriptedExpert> failing(std::string name, std::string message);

  const std::string& name() const override { return name_; }
  std::string complete(const std::string& prompt, const GenerationParams& params) override {
    ++calls_;
    return fn_(prompt, params);
  }

  /// Number of calls so far, including ones that threw.
  std::size_t calls() const { return calls_; }

 private:
  std::string name_;
  Fn fn_;
  std::size_t calls_ = 0;
};

/// Recorded request/response pairs, persisted as JSON lines. Lookup is keyed
/// by (expert, prompt fingerprint). When a key holds several responses they
/// are served in recorded order; the last one then repeats, so a single
/// recorded exchange also satisfies repeated identical calls.
class Transcript {
 public:
  void add(const std::string& expert, const std::string& prompt_hash, const std::string& response_text,
           const GenerationParams& params);

  /// Throws TranscriptMiss when the key was never recorded.
  const std::string& next_response(const std::string& expert, const std::string& prompt_hash);

  bool contains(const std::string& expert, const std::string& prompt_hash) const;
  std::size_t size() const { return size_; }

  void save(const std::string& path) const;
  /// Throws MissingFile when the path cannot be read.
  static std::shared_ptr<Transcript> load(const std::string& path);

 private:
  struct Record {
    std::string expert;
    std::string prompt_hash;
    std::string response_text;
    nlohmann::json params;
  };
  struct Slot {
    std::vector<std::string> responses;
    std::size_t next = 0;
  };
  std::vector<Record> records_;  // insertion order, what save() writes
  std::map<std::pair<std::string, std::string>, Slot> slots_;
  std::size_t size_ = 0;
};

/// Serves completions from a transcript only; any unrecorded request throws
/// TranscriptMiss. Backs --replay runs.
class ReplayExpert final : public Expert {
 public:
  ReplayExpert(std::string name, std::shared_ptr<Transcript> transcript)
      : name_(std::move(name)), transcript_(std::move(transcript)) {}

  const std::string& name() const override { return name_; }
  std::string complete(const std::string& prompt, const GenerationParams& params) override;

 private:
  std::string name_;
  std::shared_ptr<Transcript> transcript_;
};

/// Forwards to an inner expert and records every exchange. Backs --record.
class RecordingExpert final : public Expert {
 public:
  RecordingExpert(std::unique_ptr<Expert> inner, std::shared_ptr<Transcript> transcript)
      : inner_(std::move(inner)), transcript_(std::move(transcript)) {}

  const std::string& name() const override { return inner_->name(); }
  std::string complete(const std::string& prompt, const GenerationParams& params) override;

 private:
  std::unique_ptr<Expert> inner_;
  std::shared_ptr<Transcript> transcript_;
};

/// Pulls the SQL out of a model response: the first fenced code block if one
/// exists, otherwise the first statement starting at a SELECT or WITH keyword
/// and running to the first semicolon outside quotes. The result is trimmed
/// with no trailing semicolon, so the function is idempotent. Throws
/// NoSqlFound when neither form appears.
std::string extract_sql(const std::string& response);

/// Asks every expert in slot order and isolates failures: a throwing expert
/// yields a failed candidate in its slot, never aborts the others.
std::vector<SqlCandidate> query_ensemble(const std::vector<Expert*>& experts, const std::string& prompt,
                                         const GenerationParams& params);

}  // namespace sqlens
