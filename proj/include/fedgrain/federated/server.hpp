#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fedgrain/autodiff/param_set.hpp"
#include "json.hpp"

namespace fedgrain::fed {

// The only payload types the broker accepts. There is deliberately no way to
// post an image or a label map.
enum class PayloadKind { kCheckpoint, kMetadata };

std::string kind_name(PayloadKind kind);

inline constexpr const char* kServerId = "server";

struct Message {
  std::size_t round = 0;
  std::string sender;
  std::string recipient;
  PayloadKind kind = PayloadKind::kMetadata;
  std::string topic;    // e.g. "global-model", "local-update", "style-model/generator"
  std::string payload;  // FGPS checkpoint bytes or a JSON object
};

struct TranscriptEntry {
  std::size_t round = 0;
  std::string sender;
  std::string recipient;
  PayloadKind kind = PayloadKind::kMetadata;
  std::string topic;
  std::size_t bytes = 0;
  std::string digest;  // SHA-256 of the payload
};

nlohmann::ordered_json to_json(const TranscriptEntry& e);

// In-process message broker with a recorded transcript. Every payload is
// checked on entry: checkpoints must decode as a ParamSet, metadata must be
// a JSON object.
class Server {
 public:
  void post_checkpoint(std::size_t round, const std::string& sender, const std::string& recipient,
                       const std::string& topic, const ad::ParamSet& params);
  void post_checkpoint_bytes(std::size_t round, const std::string& sender, const std::string& recipient,
                             const std::string& topic, std::string bytes);
  void post_metadata(std::size_t round, const std::string& sender, const std::string& recipient,
                     const std::string& topic, const nlohmann::ordered_json& body);

  // Drains and returns everything addressed to recipient, in posting order.
  std::vector<Message> receive(const std::string& recipient);

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  // Every message ever posted, payload included, for auditing.
  const std::vector<Message>& archive() const { return archive_; }

 private:
  void post(Message m);

  std::mutex mutex_;
  std::map<std::string, std::vector<Message>> mailboxes_;
  std::vector<TranscriptEntry> transcript_;
  std::vector<Message> archive_;
};

struct AuditReport {
  std::size_t messages = 0;
  std::size_t checkpoints = 0;
  std::size_t metadata = 0;
  std::vector<std::string> violations;

  bool clean() const { return violations.empty(); }
};

// Re-decodes every archived payload and flags anything that is not a model
// checkpoint or small JSON metadata: PGM data, checkpoint entries shaped like
// images, or long numeric arrays inside metadata.
AuditReport audit_messages(const std::vector<Message>& archive);

}  // namespace fedgrain::fed
