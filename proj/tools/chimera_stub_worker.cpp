// Minimal trainer worker speaking the evaluation protocol. Every well-formed request
// gets a fixed loss; the fault flags let tests exercise the engine's error paths.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "chimera/errors.hpp"
#include "chimera/protocol.hpp"

int main(int argc, char** argv) {
    CLI::App app{"echo-stub trainer worker"};
    double loss = 0.5;
    int version = chimera::protocol::kVersion;
    std::optional<std::uint64_t> crash_id, malformed_id, hang_id, invalid_id, fail_id;
    double delay = 0.0;
    app.add_option("--loss", loss, "val_loss reported for every request");
    app.add_option("--version", version, "protocol version announced in hello");
    app.add_option("--crash-id", crash_id, "exit without answering this request id");
    app.add_option("--malformed-id", malformed_id, "answer this request id with garbage");
    app.add_option("--hang-id", hang_id, "never answer this request id");
    app.add_option("--invalid-id", invalid_id, "report this request id as invalid");
    app.add_option("--fail-id", fail_id, "report this request id as train_failed");
    app.add_option("--delay", delay, "seconds to sleep before each answer");
    CLI11_PARSE(app, argc, argv);

    std::cout << chimera::protocol::hello(version).dump() << std::endl;

    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        chimera::Evaluation result;
        std::uint64_t id = 0;
        try {
            const auto request = chimera::protocol::decode_request(line);
            id = request.request_id;
            result.request_id = id;
            if (crash_id && id == *crash_id) return 3;
            if (hang_id && id == *hang_id) {
                std::this_thread::sleep_for(std::chrono::hours(1));
                return 0;
            }
            if (malformed_id && id == *malformed_id) {
                std::cout << "{not json" << std::endl;
                continue;
            }
            if (delay > 0) std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            if (invalid_id && id == *invalid_id) {
                result.status = chimera::EvalStatus::Invalid;
                result.message = "rejected by worker";
            } else if (fail_id && id == *fail_id) {
                result.status = chimera::EvalStatus::TrainFailed;
                result.message = "training diverged";
            } else {
                result.val_loss = loss;
                result.train_loss = loss;
                result.chosen_lr = std::sqrt(request.lr_low * request.lr_high);
            }
        } catch (const chimera::SchemaError& e) {
            try {
                id = nlohmann::json::parse(line).at("request_id").get<std::uint64_t>();
            } catch (...) {
            }
            result.request_id = id;
            result.status = chimera::EvalStatus::Invalid;
            result.message = e.what();
        } catch (const std::exception& e) {
            std::cerr << "stub worker: " << e.what() << '\n';
            return 2;
        }
        std::cout << chimera::protocol::encode_result(result).dump() << std::endl;
    }
    return 0;
}
