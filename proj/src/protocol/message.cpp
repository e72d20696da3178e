#include "vc/protocol/message.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace vc::protocol {

namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 10> kKindNames{{
    {MessageKind::hello, "hello"},
    {MessageKind::ticket_request, "ticket_request"},
    {MessageKind::ticket_grant, "ticket_grant"},
    {MessageKind::no_ticket, "no_ticket"},
    {MessageKind::task_request, "task_request"},
    {MessageKind::task_payload, "task_payload"},
    {MessageKind::result_submit, "result_submit"},
    {MessageKind::result_ack, "result_ack"},
    {MessageKind::error_submit, "error_submit"},
    {MessageKind::control, "control"},
}};

void check_representable(const Json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>()))
    throw EncodeError("non-finite number in message body");
  if (j.is_structured())
    for (const auto& child : j) check_representable(child);
}

Json encode_body(const Hello& b) {
  Json j{{"worker_id", b.worker_id}};
  if (!b.user_agent.empty()) j["user_agent"] = b.user_agent;
  return j;
}
Json encode_body(const TicketRequest&) { return Json::object(); }
Json encode_body(const TicketGrant& b) {
  return Json{{"ticket_id", b.ticket_id.value}, {"project_id", b.project_id}, {"task_id", b.task_id},
              {"task_version", b.task_version}, {"input_index", b.input_index}, {"args", b.args}};
}
Json encode_body(const NoTicket& b) { return Json{{"retry_after_ms", b.retry_after_ms}}; }
Json encode_body(const TaskRequest& b) { return Json{{"task_id", b.task_id}}; }
Json encode_body(const TaskPayload& b) {
  Json resources = Json::array();
  for (const auto& r : b.resources) resources.push_back(Json{{"name", r.name}, {"hash", r.hash}});
  return Json{{"found", b.found}, {"descriptor", to_json(b.descriptor)}, {"resources", std::move(resources)}};
}
Json encode_body(const ResultSubmit& b) { return Json{{"ticket_id", b.ticket_id.value}, {"result", b.result}}; }
Json encode_body(const ResultAck& b) {
  return Json{{"ticket_id", b.ticket_id.value}, {"outcome", to_string(b.outcome)}};
}
Json encode_body(const ErrorSubmit& b) {
  return Json{{"ticket_id", b.ticket_id.value}, {"message", b.message}, {"trace", b.trace}};
}
Json encode_body(const Control& b) { return Json{{"command", to_string(b.command)}, {"url", b.url}}; }

// Field accessors that translate absence and type errors into DecodeError.
const Json& field(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DecodeError(DecodeErrorKind::missing_field, std::string("missing field: ") + key);
  return *it;
}

std::string string_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_string()) throw DecodeError(DecodeErrorKind::wrong_type, std::string("field must be a string: ") + key);
  return v.get<std::string>();
}

std::uint64_t uint_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw DecodeError(DecodeErrorKind::wrong_type, std::string("field must be a non-negative integer: ") + key);
  return v.get<std::uint64_t>();
}

std::int64_t int_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_integer()) throw DecodeError(DecodeErrorKind::wrong_type, std::string("field must be an integer: ") + key);
  return v.get<std::int64_t>();
}

bool bool_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_boolean()) throw DecodeError(DecodeErrorKind::wrong_type, std::string("field must be a boolean: ") + key);
  return v.get<bool>();
}

const Json& object_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_object()) throw DecodeError(DecodeErrorKind::wrong_type, std::string("field must be an object: ") + key);
  return v;
}

const Json& array_field(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_array()) throw DecodeError(DecodeErrorKind::wrong_type, std::string("field must be an array: ") + key);
  return v;
}

std::vector<std::string> string_list(const Json& arr, const char* key) {
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (!v.is_string()) throw DecodeError(DecodeErrorKind::wrong_type, std::string("list entries must be strings: ") + key);
    out.push_back(v.get<std::string>());
  }
  return out;
}

MessageBody decode_body(MessageKind kind, const Json& b) {
  switch (kind) {
    case MessageKind::hello:
      return Hello{string_field(b, "worker_id"), b.contains("user_agent") ? string_field(b, "user_agent") : ""};
    case MessageKind::ticket_request:
      return TicketRequest{};
    case MessageKind::ticket_grant:
      return TicketGrant{TicketId{uint_field(b, "ticket_id")}, string_field(b, "project_id"),
                         string_field(b, "task_id"), string_field(b, "task_version"),
                         static_cast<std::size_t>(uint_field(b, "input_index")), field(b, "args")};
    case MessageKind::no_ticket:
      return NoTicket{int_field(b, "retry_after_ms")};
    case MessageKind::task_request:
      return TaskRequest{string_field(b, "task_id")};
    case MessageKind::task_payload: {
      TaskPayload p;
      p.found = bool_field(b, "found");
      const Json& d = object_field(b, "descriptor");
      p.descriptor.task_id = string_field(d, "task_id");
      p.descriptor.version = string_field(d, "version");
      p.descriptor.resource_deps = string_list(array_field(d, "resource_deps"), "resource_deps");
      p.descriptor.chunking = static_cast<std::size_t>(uint_field(d, "chunking"));
      for (const auto& r : array_field(b, "resources")) {
        if (!r.is_object()) throw DecodeError(DecodeErrorKind::wrong_type, "resources entries must be objects");
        p.resources.push_back({string_field(r, "name"), string_field(r, "hash")});
      }
      return p;
    }
    case MessageKind::result_submit:
      return ResultSubmit{TicketId{uint_field(b, "ticket_id")}, field(b, "result")};
    case MessageKind::result_ack: {
      const std::string outcome = string_field(b, "outcome");
      SubmitOutcome o;
      if (outcome == "accepted") o = SubmitOutcome::accepted;
      else if (outcome == "duplicate") o = SubmitOutcome::duplicate;
      else if (outcome == "unknown") o = SubmitOutcome::unknown;
      else throw DecodeError(DecodeErrorKind::wrong_type, "unknown result outcome: " + outcome);
      return ResultAck{TicketId{uint_field(b, "ticket_id")}, o};
    }
    case MessageKind::error_submit:
      return ErrorSubmit{TicketId{uint_field(b, "ticket_id")}, string_field(b, "message"), string_field(b, "trace")};
    case MessageKind::control: {
      const std::string command = string_field(b, "command");
      auto c = control_command_from_string(command);
      if (!c) throw DecodeError(DecodeErrorKind::wrong_type, "unknown control command: " + command);
      return Control{*c, string_field(b, "url")};
    }
  }
  throw DecodeError(DecodeErrorKind::unknown_kind, "unknown kind");
}

}  // namespace

std::string_view to_string(MessageKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<MessageKind> message_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  return std::nullopt;
}

std::string_view to_string(SubmitOutcome outcome) {
  switch (outcome) {
    case SubmitOutcome::accepted: return "accepted";
    case SubmitOutcome::duplicate: return "duplicate";
    case SubmitOutcome::unknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(ControlCommand command) {
  switch (command) {
    case ControlCommand::reload: return "reload";
    case ControlCommand::redirect: return "redirect";
    case ControlCommand::stop: return "stop";
  }
  return "reload";
}

std::optional<ControlCommand> control_command_from_string(std::string_view text) {
  if (text == "reload") return ControlCommand::reload;
  if (text == "redirect") return ControlCommand::redirect;
  if (text == "stop") return ControlCommand::stop;
  return std::nullopt;
}

std::string_view to_string(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::malformed_json: return "malformed_json";
    case DecodeErrorKind::not_an_object: return "not_an_object";
    case DecodeErrorKind::missing_field: return "missing_field";
    case DecodeErrorKind::wrong_type: return "wrong_type";
    case DecodeErrorKind::unknown_kind: return "unknown_kind";
    case DecodeErrorKind::version_mismatch: return "version_mismatch";
  }
  return "malformed_json";
}

MessageKind WireMessage::kind() const {
  return std::visit([](const auto& b) { return std::decay_t<decltype(b)>::kind; }, body);
}

std::string encode_message(const WireMessage& msg) {
  Json body = std::visit([](const auto& b) { return encode_body(b); }, msg.body);
  check_representable(body);
  Json doc;
  doc["kind"] = std::string(to_string(msg.kind()));
  doc["protocol_version"] = msg.protocol_version;
  doc["body"] = std::move(body);
  try {
    return doc.dump();
  } catch (const Json::type_error& e) {
    throw EncodeError(std::string("unrepresentable message body: ") + e.what());
  }
}

WireMessage decode_message(std::string_view bytes) {
  Json doc = Json::parse(bytes.begin(), bytes.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw DecodeError(DecodeErrorKind::malformed_json, "malformed JSON message");
  if (!doc.is_object()) throw DecodeError(DecodeErrorKind::not_an_object, "message must be a JSON object");

  const std::string kind_name = string_field(doc, "kind");
  auto kind = message_kind_from_string(kind_name);
  if (!kind) throw DecodeError(DecodeErrorKind::unknown_kind, "unknown message kind: " + kind_name);

  const std::int64_t version = int_field(doc, "protocol_version");
  if (version != kProtocolVersion)
    throw DecodeError(DecodeErrorKind::version_mismatch,
                      "protocol version " + std::to_string(version) + " != " + std::to_string(kProtocolVersion));

  WireMessage msg;
  msg.protocol_version = static_cast<int>(version);
  msg.body = decode_body(*kind, object_field(doc, "body"));
  return msg;
}

}  // namespace vc::protocol
