#include <gtest/gtest.h>

#include "chimera/errors.hpp"
#include "chimera/protocol.hpp"

using namespace chimera;

namespace {

EvaluationRequest sample_request() {
    Genome g;
    g.layers = {LayerSpec::conv({3, 3}, {1, 1}, {1, 1}, 12345), LayerSpec::relu(),
                LayerSpec::pool(LayerKind::MaxPool, {2, 2}, {2, 2}, {0, 0})};
    g.lineage_id = "r.1";
    auto req = make_request(g, 42, TrainingBudget{7, 2});
    return req;
}

}  // namespace

TEST(Protocol, HelloRoundTrip) {
    EXPECT_EQ(protocol::parse_hello(protocol::hello().dump()), protocol::kVersion);
    EXPECT_EQ(protocol::parse_hello(protocol::hello(9).dump()), 9);
    EXPECT_THROW(protocol::parse_hello(R"({"type":"result"})"), ProtocolError);
    EXPECT_THROW(protocol::parse_hello("hello"), ProtocolError);
    EXPECT_THROW(protocol::parse_hello(R"({"type":"hello"})"), ProtocolError);
}

TEST(Protocol, RequestRoundTrip) {
    const auto req = sample_request();
    const std::string line = protocol::encode_request(req).dump();
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const auto back = protocol::decode_request(line);
    EXPECT_EQ(back.request_id, 42u);
    EXPECT_EQ(back.genome, req.genome);
    EXPECT_EQ(back.lr_low, req.lr_low);
    EXPECT_EQ(back.lr_high, req.lr_high);
    ASSERT_TRUE(back.budget.has_value());
    EXPECT_EQ(*back.budget, (TrainingBudget{7, 2}));
}

TEST(Protocol, RequestWithoutBudget) {
    auto req = sample_request();
    req.budget.reset();
    const auto msg = protocol::encode_request(req);
    EXPECT_FALSE(msg.contains("budget"));
    EXPECT_FALSE(protocol::decode_request(msg.dump()).budget.has_value());
}

TEST(Protocol, RequestErrors) {
    auto msg = protocol::encode_request(sample_request());
    EXPECT_THROW(protocol::decode_request("{"), ProtocolError);
    auto wrong = msg;
    wrong["type"] = "result";
    EXPECT_THROW(protocol::decode_request(wrong.dump()), ProtocolError);
    auto missing = msg;
    missing.erase("lr_low");
    EXPECT_THROW(protocol::decode_request(missing.dump()), ProtocolError);
    auto bad_genome = msg;
    bad_genome["genome"]["layers"][0]["kind"] = "dense";
    EXPECT_THROW(protocol::decode_request(bad_genome.dump()), SchemaError);
}

TEST(Protocol, ResultRoundTrip) {
    Evaluation ok;
    ok.request_id = 5;
    ok.val_loss = 0.25;
    ok.train_loss = 0.125;
    ok.chosen_lr = 3e-4;
    ok.wall_seconds = 1.5;
    EXPECT_EQ(protocol::decode_result(protocol::encode_result(ok).dump()), ok);

    Evaluation failed;
    failed.request_id = 6;
    failed.status = EvalStatus::TrainFailed;
    failed.message = "nan";
    const auto msg = protocol::encode_result(failed);
    EXPECT_FALSE(msg.contains("val_loss"));
    EXPECT_EQ(msg.at("status"), "train_failed");
    EXPECT_EQ(protocol::decode_result(msg.dump()), failed);

    failed.status = EvalStatus::Invalid;
    EXPECT_EQ(protocol::decode_result(protocol::encode_result(failed).dump()).status, EvalStatus::Invalid);
}

TEST(Protocol, ResultErrors) {
    EXPECT_THROW(protocol::decode_result("{not json"), ProtocolError);
    EXPECT_THROW(protocol::decode_result(R"({"type":"result","request_id":1,"status":"ok","chosen_lr":0.1})"),
                 ProtocolError);
    EXPECT_THROW(protocol::decode_result(R"({"type":"result","request_id":1,"status":"ok","val_loss":0.1})"),
                 ProtocolError);
    EXPECT_THROW(protocol::decode_result(R"({"type":"result","request_id":1,"status":"maybe"})"), ProtocolError);
    EXPECT_THROW(protocol::decode_result(R"({"type":"result","status":"ok"})"), ProtocolError);
    EXPECT_THROW(protocol::decode_result(R"({"type":"result","request_id":"x","status":"train_failed"})"),
                 ProtocolError);
}
