// Copyright (c) 2026, The agprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>

#include "agprune/agent.hpp"
#include "agprune/json_schema.hpp"
#include "stub_server.hpp"

using namespace agprune;
using nlohmann::json;
using agprune::testing::content_reply;
using agprune::testing::StubServer;

namespace {

AgentContext make_context() {
  AgentContext c;
  c.current_sparsity = 0.2;
  c.target_sparsity = 0.5;
  c.ppl_current = 21.0;
  c.ppl_baseline = 20.0;
  c.iteration = 1;
  c.profiles = {{"blocks.0.attn.v_proj", 1.0, 0.1, -1.4, -0.8, 0.2},
                {"lm_head", 2.0, 0.5, -0.3, 1.2, 0.0},
                {"blocks.0.mlp.up_proj", 3.0, 0.2, 0.9, 0.1, 0.1},
                {"blocks.0.attn.q_proj", 4.0, 0.3, 1.6, 0.3, 0.4}};
  return c;
}

AgentEndpointConfig endpoint_for(const StubServer& stub, int retries) {
  AgentEndpointConfig e;
  e.url = stub.url();
  e.max_retries = retries;
  e.timeout_seconds = 5;
  e.api_key_env = "AGPRUNE_TEST_KEY";
  ::setenv("AGPRUNE_TEST_KEY", "sk-test", 1);
  return e;
}

const std::string kValid =
    R"({"reasoning":"prune v","stop_pruning":false,"layer_decisions":[{"layer":"blocks.0.attn.v_proj","additional_sparsity":0.05}]})";

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("prompt without feedback has no feedback block and is deterministic") {
  const auto ctx = make_context();
  const auto a = render_prompt(ctx);
  const auto b = render_prompt(ctx);
  CHECK(a.system == b.system);
  CHECK(a.user == b.user);
  CHECK(a.user.find("Feedback from the previous iteration") == std::string::npos);
  CHECK(a.user.find("0.2000") != std::string::npos);
  CHECK(a.user.find("0.5000") != std::string::npos);
  CHECK(a.user.find("21.0000") != std::string::npos);
  CHECK(a.user.find("20.0000") != std::string::npos);
  CHECK(a.user.find("[0.01, 0.15]") != std::string::npos);
  CHECK(a.user.find("stop_pruning") != std::string::npos);
  CHECK(a.system.find("analyze") != std::string::npos);
}

TEST_CASE("prompt lists every profile once, in the given order") {
  auto ctx = make_context();
  const auto user = render_prompt(ctx).user;
  std::size_t last = 0;
  for (const auto& p : ctx.profiles) {
    const std::string row = p.layer + " | ";
    CHECK(count_of(user, row) == 1);
    const auto pos = user.find(row);
    CHECK(pos > last);
    last = pos;
  }
}

TEST_CASE("prompt renders the feedback block") {
  auto ctx = make_context();
  FeedbackRecord fb;
  fb.prev_decision = {"went for v", false, {{"lm_head", 0.05}}};
  fb.sparsity_gain = 0.012;
  fb.ppl_change_pct = 3.5;
  fb.assessment = {AssessmentTier::Good, std::string(kGoodMessage)};
  ctx.feedback = fb;
  const auto user = render_prompt(ctx).user;
  CHECK(user.find("Feedback from the previous iteration") != std::string::npos);
  CHECK(user.find("went for v") != std::string::npos);
  CHECK(user.find("lm_head (+0.0500)") != std::string::npos);
  CHECK(user.find("+0.0120") != std::string::npos);
  CHECK(user.find("+3.50%") != std::string::npos);
  CHECK(user.find(std::string(kGoodMessage)) != std::string::npos);
}

TEST_CASE("decision schema") {
  const auto schema = decision_schema();
  CHECK_FALSE(schema_violation(schema, json::parse(kValid)));
  auto missing = json::parse(kValid);
  missing.erase("stop_pruning");
  CHECK(schema_violation(schema, missing));
  auto too_big = json::parse(kValid);
  too_big["layer_decisions"][0]["additional_sparsity"] = 0.2;
  CHECK(schema_violation(schema, too_big));
  auto extra = json::parse(kValid);
  extra["bonus"] = 1;
  CHECK(schema_violation(schema, extra));
  auto wrong_type = json::parse(kValid);
  wrong_type["reasoning"] = 3;
  CHECK(schema_violation(schema, wrong_type));
}

TEST_CASE("validate_decision normalizes and classifies errors") {
  const auto ctx = make_context();
  const auto stop =
      validate_decision(R"({"reasoning":"r","stop_pruning":true,"layer_decisions":[]})", ctx);
  CHECK(stop.stop_pruning);
  CHECK(stop.layer_decisions.empty());

  auto kind_of = [&](const std::string& raw) {
    try {
      validate_decision(raw, ctx);
    } catch (const DecisionError& e) {
      return e.kind();
    }
    FAIL("expected a DecisionError");
    return DecisionErrorKind::malformed_json;
  };
  CHECK(kind_of("{not json") == DecisionErrorKind::malformed_json);
  CHECK(kind_of(R"({"reasoning":"r","stop_pruning":false,"layer_decisions":[{"layer":"ghost","additional_sparsity":0.05}]})") ==
        DecisionErrorKind::unknown_layer);
  CHECK(kind_of(R"({"reasoning":"r","stop_pruning":false,"layer_decisions":[]})") ==
        DecisionErrorKind::empty_decisions);
  CHECK(kind_of(R"({"reasoning":"r","layer_decisions":[]})") ==
        DecisionErrorKind::schema_violation);

  const auto low = validate_decision(
      R"({"reasoning":"r","stop_pruning":false,"layer_decisions":[{"layer":"lm_head","additional_sparsity":0.009},{"layer":"blocks.0.attn.v_proj","additional_sparsity":0.4},{"layer":"lm_head","additional_sparsity":0.1}]})",
      ctx);
  REQUIRE(low.layer_decisions.size() == 2);
  CHECK(low.layer_decisions[0] == LayerDecision{"lm_head", 0.01});
  CHECK(low.layer_decisions[1] == LayerDecision{"blocks.0.attn.v_proj", 0.15});

  const auto fenced = validate_decision("```json\n" + kValid + "\n```", ctx);
  CHECK(fenced.layer_decisions.size() == 1);
}

TEST_CASE("heuristic policy examples") {
  auto ctx = make_context();
  ctx.current_sparsity = 0.5;
  CHECK(heuristic_decide(ctx).stop_pruning);

  ctx.current_sparsity = 0.4;
  auto d = heuristic_decide(ctx);
  CHECK_FALSE(d.stop_pruning);
  // lm_head fails the gradient filter; q_proj is eligible (0.4 < 0.9).
  REQUIRE(d.layer_decisions.size() == 3);
  CHECK(d.layer_decisions[0].layer == "blocks.0.attn.v_proj");
  CHECK(d.layer_decisions[1].layer == "blocks.0.mlp.up_proj");
  CHECK(d.layer_decisions[2].layer == "blocks.0.attn.q_proj");
  for (const auto& ld : d.layer_decisions) {
    CHECK(ld.additional_sparsity == doctest::Approx(0.05).epsilon(1e-12));
  }

  ctx.current_sparsity = 0.0;
  for (const auto& ld : heuristic_decide(ctx).layer_decisions) {
    CHECK(ld.additional_sparsity == 0.15);
  }

  ctx.current_sparsity = 0.4;
  FeedbackRecord poor;
  poor.assessment = {AssessmentTier::Poor, std::string(kPoorMessage)};
  poor.rolled_back = true;
  ctx.feedback = poor;
  for (const auto& ld : heuristic_decide(ctx).layer_decisions) {
    CHECK(ld.additional_sparsity == doctest::Approx(0.025).epsilon(1e-12));
  }
  ctx.current_sparsity = 0.49;
  for (const auto& ld : heuristic_decide(ctx).layer_decisions) {
    CHECK(ld.additional_sparsity == 0.01);
  }
}

TEST_CASE("heuristic falls back to the lowest z_sens and caps at five layers") {
  auto ctx = make_context();
  for (auto& p : ctx.profiles) {
    p.z_grad = 2.0;
  }
  const auto d = heuristic_decide(ctx);
  REQUIRE(d.layer_decisions.size() == 4);
  CHECK(d.layer_decisions[0].layer == "blocks.0.attn.v_proj");

  AgentContext many = make_context();
  many.profiles.clear();
  for (int i = 0; i < 9; ++i) {
    many.profiles.push_back({"l" + std::to_string(i), 1, 1, -1.0 + 0.1 * i, 0.0, 0.0});
  }
  const auto five = heuristic_decide(many);
  CHECK(five.layer_decisions.size() == 5);
  CHECK(heuristic_decide(many) == five);
}

TEST_CASE("endpoint validation") {
  AgentEndpointConfig e;
  CHECK(e.temperature == 0.5);
  CHECK_NOTHROW(e.validate());
  e.temperature = 2.5;
  CHECK_THROWS_AS(e.validate(), ConfigError);
  e.temperature = 0.5;
  e.max_retries = -1;
  CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("llm agent passes a valid decision through") {
  StubServer stub({{200, content_reply(kValid)}});
  const auto ctx = make_context();
  std::vector<AgentExchange> transcript;
  const auto d = llm_decide(ctx, endpoint_for(stub, 2), &transcript);
  CHECK(d == validate_decision(kValid, ctx));
  const auto reqs = stub.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].path == "/v1/decide");
  CHECK(reqs[0].authorization == "Bearer sk-test");
  const auto body = json::parse(reqs[0].body);
  CHECK(body["temperature"] == 0.5);
  CHECK(body["response_schema"] == decision_schema());
  CHECK(body["system"] == render_prompt(ctx).system);
  CHECK(body["user"] == render_prompt(ctx).user);
  CHECK(reqs[0].body == build_request_body(render_prompt(ctx), endpoint_for(stub, 2)));
  REQUIRE(transcript.size() == 1);
  CHECK(transcript[0].status == 200);
  CHECK(transcript[0].request == reqs[0].body);
}

TEST_CASE("malformed then valid uses exactly one retry") {
  StubServer stub({{200, content_reply("{oops")}, {200, content_reply(kValid)}});
  std::vector<AgentExchange> transcript;
  const auto d = llm_decide(make_context(), endpoint_for(stub, 1), &transcript);
  CHECK(d.layer_decisions.size() == 1);
  const auto reqs = stub.requests();
  REQUIRE(reqs.size() == 2);
  CHECK(transcript.size() == 2);
  CHECK_FALSE(transcript[0].error.empty());
  const auto retry = json::parse(reqs[1].body);
  CHECK(retry["user"].get<std::string>().find("previous response was rejected") !=
        std::string::npos);
}

TEST_CASE("persistent server errors exhaust the retries") {
  StubServer stub({{500, "boom"}});
  std::vector<AgentExchange> transcript;
  CHECK_THROWS_AS(llm_decide(make_context(), endpoint_for(stub, 2), &transcript), AgentFailure);
  CHECK(stub.requests().size() == 3);
  CHECK(transcript.size() == 3);
}

TEST_CASE("missing API key fails before any request") {
  StubServer stub({{200, content_reply(kValid)}});
  auto e = endpoint_for(stub, 0);
  e.api_key_env = "AGPRUNE_TEST_KEY_UNSET";
  ::unsetenv("AGPRUNE_TEST_KEY_UNSET");
  CHECK_THROWS_AS(llm_decide(make_context(), e), AgentFailure);
  CHECK(stub.requests().empty());
}

TEST_CASE("unreachable endpoint surfaces as agent failure") {
  AgentEndpointConfig e;
  e.url = "http://127.0.0.1:1/v1/decide";
  e.max_retries = 0;
  e.timeout_seconds = 2;
  e.api_key_env = "";
  CHECK_THROWS_AS(llm_decide(make_context(), e), AgentFailure);
}
