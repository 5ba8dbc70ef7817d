#include "chimera/protocol.hpp"

#include <cmath>

namespace chimera::protocol {

namespace {

nlohmann::json parse_line(const std::string& line) {
    try {
        return nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    }
}

void expect_type(const nlohmann::json& msg, const char* type) {
    if (!msg.is_object() || !msg.contains("type") || msg.at("type") != type)
        throw ProtocolError(std::string("expected a '") + type + "' message");
}

template <typename T>
T field(const nlohmann::json& msg, const char* name) {
    if (!msg.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
    try {
        return msg.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ProtocolError(std::string("field '") + name + "' has the wrong type");
    }
}

}  // namespace

nlohmann::json hello(int version) { return {{"type", "hello"}, {"protocol_version", version}}; }

int parse_hello(const std::string& line) {
    const auto msg = parse_line(line);
    expect_type(msg, "hello");
    return field<int>(msg, "protocol_version");
}

nlohmann::json encode_request(const EvaluationRequest& request) {
    nlohmann::json msg{{"type", "eval"},
                       {"request_id", request.request_id},
                       {"genome", to_json(request.genome)},
                       {"lr_low", request.lr_low},
                       {"lr_high", request.lr_high}};
    if (request.budget)
        msg["budget"] = {{"max_epochs", request.budget->max_epochs}, {"patience", request.budget->patience}};
    return msg;
}

EvaluationRequest decode_request(const std::string& line) {
    const auto msg = parse_line(line);
    expect_type(msg, "eval");
    EvaluationRequest request;
    request.request_id = field<std::uint64_t>(msg, "request_id");
    request.lr_low = field<double>(msg, "lr_low");
    request.lr_high = field<double>(msg, "lr_high");
    if (msg.contains("budget") && !msg.at("budget").is_null()) {
        const auto& b = msg.at("budget");
        request.budget = TrainingBudget{field<int>(b, "max_epochs"), field<int>(b, "patience")};
    }
    if (!msg.contains("genome")) throw ProtocolError("missing field 'genome'");
    request.genome = genome_from_json(msg.at("genome"));
    return request;
}

nlohmann::json encode_result(const Evaluation& result) {
    nlohmann::json msg{{"type", "result"},
                       {"request_id", result.request_id},
                       {"status", to_string(result.status)},
                       {"train_loss", result.train_loss},
                       {"wall_seconds", result.wall_seconds}};
    if (result.ok()) {
        msg["val_loss"] = result.val_loss;
        if (result.chosen_lr) msg["chosen_lr"] = *result.chosen_lr;
    }
    if (!result.message.empty()) msg["message"] = result.message;
    return msg;
}

Evaluation decode_result(const std::string& line) {
    const auto msg = parse_line(line);
    expect_type(msg, "result");
    Evaluation result;
    result.request_id = field<std::uint64_t>(msg, "request_id");
    const auto status = field<std::string>(msg, "status");
    try {
        result.status = eval_status_from_string(status);
    } catch (const SchemaError& e) {
        throw ProtocolError(e.what());
    }
    if (msg.contains("train_loss") && !msg.at("train_loss").is_null()) result.train_loss = field<double>(msg, "train_loss");
    if (msg.contains("wall_seconds") && !msg.at("wall_seconds").is_null())
        result.wall_seconds = field<double>(msg, "wall_seconds");
    if (msg.contains("message") && msg.at("message").is_string()) result.message = msg.at("message").get<std::string>();
    if (result.ok()) {
        result.val_loss = field<double>(msg, "val_loss");
        result.chosen_lr = field<double>(msg, "chosen_lr");
    }
    return result;
}

}  // namespace chimera::protocol
