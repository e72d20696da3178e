#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vc/protocol/types.hpp"

namespace vc::protocol {

inline constexpr int kProtocolVersion = 1;

enum class MessageKind {
  hello,
  ticket_request,
  ticket_grant,
  no_ticket,
  task_request,
  task_payload,
  result_submit,
  result_ack,
  error_submit,
  control,
};

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> message_kind_from_string(std::string_view text);

// Sent by the worker on connect; echoed by the coordinator with the
// assigned worker id.
struct Hello {
  static constexpr MessageKind kind = MessageKind::hello;
  std::string worker_id;
  std::string user_agent;
  bool operator==(const Hello&) const = default;
};

struct TicketRequest {
  static constexpr MessageKind kind = MessageKind::ticket_request;
  bool operator==(const TicketRequest&) const = default;
};

struct TicketGrant {
  static constexpr MessageKind kind = MessageKind::ticket_grant;
  TicketId ticket_id;
  std::string project_id;
  std::string task_id;
  std::string task_version;
  std::size_t input_index = 0;
  Json args;
  bool operator==(const TicketGrant&) const = default;
};

struct NoTicket {
  static constexpr MessageKind kind = MessageKind::no_ticket;
  DurationMs retry_after_ms = 1000;
  bool operator==(const NoTicket&) const = default;
};

struct TaskRequest {
  static constexpr MessageKind kind = MessageKind::task_request;
  std::string task_id;
  bool operator==(const TaskRequest&) const = default;
};

struct ResourceRef {
  std::string name;
  std::string hash;
  bool operator==(const ResourceRef&) const = default;
};

// `found` is false when the coordinator has no such task; descriptor and
// resources are then empty.
struct TaskPayload {
  static constexpr MessageKind kind = MessageKind::task_payload;
  bool found = true;
  TaskDescriptor descriptor;
  std::vector<ResourceRef> resources;
  bool operator==(const TaskPayload&) const = default;
};

struct ResultSubmit {
  static constexpr MessageKind kind = MessageKind::result_submit;
  TicketId ticket_id;
  Json result;
  bool operator==(const ResultSubmit&) const = default;
};

enum class SubmitOutcome { accepted, duplicate, unknown };
std::string_view to_string(SubmitOutcome outcome);

struct ResultAck {
  static constexpr MessageKind kind = MessageKind::result_ack;
  TicketId ticket_id;
  SubmitOutcome outcome = SubmitOutcome::accepted;
  bool operator==(const ResultAck&) const = default;
};

struct ErrorSubmit {
  static constexpr MessageKind kind = MessageKind::error_submit;
  TicketId ticket_id;
  std::string message;
  std::string trace;
  bool operator==(const ErrorSubmit&) const = default;
};

enum class ControlCommand { reload, redirect, stop };
std::string_view to_string(ControlCommand command);
std::optional<ControlCommand> control_command_from_string(std::string_view text);

struct Control {
  static constexpr MessageKind kind = MessageKind::control;
  ControlCommand command = ControlCommand::reload;
  std::string url;  // redirect target; empty otherwise
  bool operator==(const Control&) const = default;
};

using MessageBody = std::variant<Hello, TicketRequest, TicketGrant, NoTicket, TaskRequest, TaskPayload,
                                 ResultSubmit, ResultAck, ErrorSubmit, Control>;

struct WireMessage {
  int protocol_version = kProtocolVersion;
  MessageBody body;

  MessageKind kind() const;
  bool operator==(const WireMessage&) const = default;

  template <typename Body>
  const Body* as() const {
    return std::get_if<Body>(&body);
  }
};

template <typename Body>
WireMessage make_message(Body body) {
  return WireMessage{kProtocolVersion, MessageBody{std::move(body)}};
}

class EncodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DecodeErrorKind { malformed_json, not_an_object, missing_field, wrong_type, unknown_kind, version_mismatch };
std::string_view to_string(DecodeErrorKind kind);

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  DecodeErrorKind kind() const { return kind_; }

 private:
  DecodeErrorKind kind_;
};

// Compact UTF-8 JSON with a fixed key order. Throws EncodeError on
// non-finite numbers or invalid UTF-8 inside opaque blobs.
std::string encode_message(const WireMessage& msg);

// Unknown fields are ignored; unknown kinds and version mismatches throw.
WireMessage decode_message(std::string_view bytes);

}  // namespace vc::protocol
