#include "fedgrain/federated/server.hpp"

#include "fedgrain/common/digest.hpp"
#include "fedgrain/common/error.hpp"

namespace fedgrain::fed {

namespace {

constexpr std::size_t kMaxMetadataArray = 1024;

bool looks_like_pgm(const std::string& s) {
  return s.size() >= 3 && s[0] == 'P' && (s[1] == '5' || s[1] == '2') &&
         (s[2] == '\n' || s[2] == ' ' || s[2] == '\r' || s[2] == '\t');
}

void scan_json(const nlohmann::json& j, const std::string& where, std::vector<std::string>& out) {
  if (j.is_array() && j.size() > kMaxMetadataArray)
    out.push_back(where + ": array of " + std::to_string(j.size()) + " values in metadata");
  if (j.is_string() && looks_like_pgm(j.get<std::string>())) out.push_back(where + ": embedded PGM data");
  if (j.is_structured())
    for (const auto& [k, v] : j.items()) scan_json(v, where + "/" + k, out);
}

}  // namespace

std::string kind_name(PayloadKind kind) { return kind == PayloadKind::kCheckpoint ? "checkpoint" : "metadata"; }

nlohmann::ordered_json to_json(const TranscriptEntry& e) {
  return {{"round", e.round},   {"sender", e.sender}, {"recipient", e.recipient}, {"kind", kind_name(e.kind)},
          {"topic", e.topic},   {"bytes", e.bytes},   {"sha256", e.digest}};
}

void Server::post_checkpoint(std::size_t round, const std::string& sender, const std::string& recipient,
                             const std::string& topic, const ad::ParamSet& params) {
  post({round, sender, recipient, PayloadKind::kCheckpoint, topic, ad::serialize_checkpoint(params)});
}

void Server::post_checkpoint_bytes(std::size_t round, const std::string& sender, const std::string& recipient,
                                   const std::string& topic, std::string bytes) {
  ad::deserialize_checkpoint(bytes);
  post({round, sender, recipient, PayloadKind::kCheckpoint, topic, std::move(bytes)});
}

void Server::post_metadata(std::size_t round, const std::string& sender, const std::string& recipient,
                           const std::string& topic, const nlohmann::ordered_json& body) {
  if (!body.is_object()) throw std::invalid_argument("server: metadata must be a JSON object");
  post({round, sender, recipient, PayloadKind::kMetadata, topic, body.dump()});
}

void Server::post(Message m) {
  TranscriptEntry e{m.round, m.sender, m.recipient, m.kind, m.topic, m.payload.size(), sha256_hex(m.payload)};
  std::lock_guard lock(mutex_);
  transcript_.push_back(std::move(e));
  archive_.push_back(m);
  mailboxes_[m.recipient].push_back(std::move(m));
}

std::vector<Message> Server::receive(const std::string& recipient) {
  std::lock_guard lock(mutex_);
  auto it = mailboxes_.find(recipient);
  if (it == mailboxes_.end()) return {};
  std::vector<Message> out = std::move(it->second);
  mailboxes_.erase(it);
  return out;
}

AuditReport audit_messages(const std::vector<Message>& archive) {
  AuditReport r;
  for (std::size_t i = 0; i < archive.size(); ++i) {
    const Message& m = archive[i];
    const std::string where = "message " + std::to_string(i) + " (" + m.sender + " -> " + m.recipient + ", " + m.topic + ")";
    ++r.messages;
    if (looks_like_pgm(m.payload)) r.violations.push_back(where + ": PGM image payload");
    if (m.kind == PayloadKind::kCheckpoint) {
      ++r.checkpoints;
      try {
        const ad::ParamSet p = ad::deserialize_checkpoint(m.payload);
        for (const auto& e : p)
          // Model tensors are biases [O] or conv kernels [O, C, K, K] with K <= 7.
          if (!(e.value.rank() == 1 || (e.value.rank() == 4 && e.value.dim(2) <= 7 && e.value.dim(3) <= 7)))
            r.violations.push_back(where + ": entry " + e.name + " shaped " + ad::shape_str(e.value.shape()) +
                                   " is not a model parameter");
      } catch (const std::exception& ex) {
        r.violations.push_back(where + ": checkpoint does not decode: " + ex.what());
      }
    } else if (m.kind == PayloadKind::kMetadata) {
      ++r.metadata;
      try {
        const auto j = nlohmann::json::parse(m.payload);
        if (!j.is_object()) r.violations.push_back(where + ": metadata is not a JSON object");
        scan_json(j, where, r.violations);
      } catch (const nlohmann::json::exception& ex) {
        r.violations.push_back(where + ": metadata does not parse: " + ex.what());
      }
    } else {
      r.violations.push_back(where + ": unknown payload kind");
    }
  }
  return r;
}

}  // namespace fedgrain::fed
