#pragma once

// Line-delimited JSON protocol spoken with external trainer processes.
//
//   worker -> engine  {"type":"hello","protocol_version":1}            once, on start
//   engine -> worker  {"type":"eval","request_id":N,"genome":{...},
//                      "lr_low":x,"lr_high":y,"budget":{"max_epochs":E,"patience":P}}
//   worker -> engine  {"type":"result","request_id":N,"status":"ok"|"train_failed"|"invalid",
//                      "val_loss":v,"train_loss":t,"chosen_lr":r,"wall_seconds":w}
//
// One message per line. val_loss and chosen_lr are required when status is "ok".

#include <string>

#include <json.hpp>

#include "chimera/evaluation.hpp"
#include "chimera/genome_search.hpp"

namespace chimera::protocol {

inline constexpr int kVersion = 1;

nlohmann::json hello(int version = kVersion);

/// Returns the announced protocol version. Throws ProtocolError if the line is not a hello.
int parse_hello(const std::string& line);

nlohmann::json encode_request(const EvaluationRequest& request);

/// Throws ProtocolError for a malformed envelope and SchemaError for a genome that fails validation.
EvaluationRequest decode_request(const std::string& line);

nlohmann::json encode_result(const Evaluation& result);

/// Throws ProtocolError on malformed JSON, wrong message type or missing fields.
Evaluation decode_result(const std::string& line);

}  // namespace chimera::protocol
