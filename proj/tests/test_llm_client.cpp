// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>

#include "log_capture.hpp"
#include "netquery/error.hpp"
#include "netquery/llm_client.hpp"
#include "support.hpp"

using namespace netquery;
using namespace netquery::testing;

namespace {

PromptBundle bundle(PromptKind kind, std::string system, std::string user) {
    PromptBundle b;
    b.kind = kind;
    b.system_text = std::move(system);
    b.user_text = std::move(user);
    b.template_version = "v";
    return b;
}

ProviderSpec http_spec(const StubServer& stub) {
    ProviderSpec s;
    s.endpoint = stub.url("/v1/chat/completions");
    s.model_name = "stub-model";
    s.api_key_env = "NETQUERY_TEST_LLM_KEY";
    s.backoff_initial_ms = 10;
    s.request_timeout_s = 5;
    return s;
}

std::string completion_body(const std::string& content) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
                          {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}}
        .dump();
}

} // namespace

TEST(LlmClient, PromptHashMatchesIndependentDigest) {
    EXPECT_EQ(prompt_hash(bundle(PromptKind::Generate, "You are a code assistant.", "Task: How many pumps? ü"),
                          ModelRole::Generator),
              "c351712feb3c68c29c4fcf9e90fdec3218c97dfdcafd57faed2152190fdb7fcb");
    EXPECT_EQ(prompt_hash(bundle(PromptKind::Evaluate, "", "x"), ModelRole::Evaluator),
              "e16850ec45ba9f942d42031323754f8f6beaae90284a23788c14fa5acc03056a");
    // Framing keeps field boundaries unambiguous.
    EXPECT_NE(prompt_hash(bundle(PromptKind::Generate, "ab", "c"), ModelRole::Generator),
              prompt_hash(bundle(PromptKind::Generate, "a", "bc"), ModelRole::Generator));
}

TEST(LlmClient, RoleDiscipline) {
    EXPECT_NO_THROW(check_role(bundle(PromptKind::Evaluate, "s", "u"), ModelRole::Evaluator));
    EXPECT_NO_THROW(check_role(bundle(PromptKind::Repair, "s", "u"), ModelRole::Generator));
    EXPECT_THROW(check_role(bundle(PromptKind::Generate, "s", "u"), ModelRole::Evaluator), Error);
    EXPECT_THROW(check_role(bundle(PromptKind::Evaluate, "s", "u"), ModelRole::Generator), Error);
}

TEST(LlmClient, ScriptedProviderHitAndMiss) {
    auto b = bundle(PromptKind::Generate, "sys", "Task: How many pumps are in the network?\nmore");
    TranscriptEntry e{prompt_hash(b, ModelRole::Generator), ModelRole::Generator, "```python\ndef f(en):\n    return 1\n```",
                      "note"};
    ScriptedProvider provider({e});
    auto c = provider.complete(b, ModelRole::Generator);
    EXPECT_EQ(c.text, e.response_text);
    EXPECT_EQ(c.prompt_hash, e.prompt_hash);
    EXPECT_EQ(provider.complete(b, ModelRole::Generator).text, c.text);

    auto other = bundle(PromptKind::Generate, "sys", "Task: How many valves are in the network?");
    try {
        provider.complete(other, ModelRole::Generator);
        FAIL();
    } catch (const Error& err) {
        EXPECT_EQ(err.code(), ErrorCode::TranscriptMiss);
        EXPECT_NE(err.detail().find(prompt_hash(other, ModelRole::Generator)), std::string::npos);
        EXPECT_NE(err.detail().find("How many valves"), std::string::npos);
    }
}

TEST(LlmClient, ScriptedProviderRejectsConflictingEntries) {
    TranscriptEntry a{"h", ModelRole::Generator, "one", ""};
    TranscriptEntry b{"h", ModelRole::Generator, "two", ""};
    EXPECT_NO_THROW(ScriptedProvider({a, a}));
    try {
        ScriptedProvider({a, b});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateId);
    }
}

TEST(LlmClient, TranscriptFileRoundTrip) {
    TempDir dir;
    std::vector<TranscriptEntry> entries = {{"a1", ModelRole::Generator, "line one\nline two", "first"},
                                            {"b2", ModelRole::Evaluator, "result = f(en)", ""}};
    write_transcript(entries, dir / "t.jsonl");
    auto back = read_transcript(dir / "t.jsonl");
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].response_text, "line one\nline two");
    EXPECT_EQ(back[1].role, ModelRole::Evaluator);
    EXPECT_EQ(back[0].note, "first");
    auto sp = ScriptedProvider::from_file(dir / "t.jsonl");
    EXPECT_EQ(sp->size(), 2u);
}

TEST(LlmClient, BundledTranscriptLoads) {
    auto sp = ScriptedProvider::from_file(assets_dir() / "fixtures" / "transcripts.jsonl");
    EXPECT_GT(sp->size(), 300u);
}

TEST(LlmClient, RecordingProviderServesQueuesInOrder) {
    RecordingProvider rec;
    rec.enqueue(ModelRole::Generator, "g1", "n1");
    rec.enqueue(ModelRole::Generator, "g2", "n2");
    rec.enqueue(ModelRole::Evaluator, "e1");
    auto g = bundle(PromptKind::Generate, "s", "u1");
    auto r = bundle(PromptKind::Repair, "s", "u2");
    auto ev = bundle(PromptKind::Evaluate, "s", "u3");
    EXPECT_EQ(rec.complete(g, ModelRole::Generator).text, "g1");
    EXPECT_EQ(rec.complete(ev, ModelRole::Evaluator).text, "e1");
    EXPECT_EQ(rec.complete(r, ModelRole::Generator).text, "g2");
    EXPECT_EQ(rec.pending(ModelRole::Generator), 0u);
    EXPECT_THROW(rec.complete(g, ModelRole::Generator), Error);
    auto entries = rec.entries();
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0].note, "n1");
    EXPECT_EQ(entries[2].response_text, "g2");
}

TEST(LlmClient, RecordingProviderDetectsConflicts) {
    RecordingProvider rec;
    rec.enqueue(ModelRole::Generator, "g1");
    rec.enqueue(ModelRole::Generator, "g2");
    auto g = bundle(PromptKind::Generate, "s", "same");
    rec.complete(g, ModelRole::Generator);
    rec.complete(g, ModelRole::Generator);
    EXPECT_THROW(rec.entries(), Error);
}

TEST(LlmClient, HttpProviderWireFormat) {
    StubServer stub;
    nlohmann::json seen;
    std::string auth;
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion_body("```python\ndef f(en):\n    return 1\n```"), "application/json");
    });
    stub.start();
    setenv("NETQUERY_TEST_LLM_KEY", "sk-test-0123456789", 1);
    HttpChatProvider provider(http_spec(stub));
    auto b = bundle(PromptKind::Generate, "system words", "user words");
    auto c = provider.complete(b, ModelRole::Generator);

    EXPECT_EQ(c.text, "```python\ndef f(en):\n    return 1\n```");
    EXPECT_EQ(c.prompt_hash, prompt_hash(b, ModelRole::Generator));
    EXPECT_EQ(c.meta.prompt_tokens, 12);
    EXPECT_EQ(c.meta.completion_tokens, 3);
    EXPECT_EQ(auth, "Bearer sk-test-0123456789");
    EXPECT_EQ(seen["model"], "stub-model");
    EXPECT_EQ(seen["temperature"], 0.0);
    ASSERT_EQ(seen["messages"].size(), 2u);
    EXPECT_EQ(seen["messages"][0], (nlohmann::json{{"role", "system"}, {"content", "system words"}}));
    EXPECT_EQ(seen["messages"][1], (nlohmann::json{{"role", "user"}, {"content", "user words"}}));
}

TEST(LlmClient, HttpProviderRetriesTransientFailures) {
    StubServer stub;
    std::atomic<int> calls{0};
    std::vector<std::string> bodies;
    std::mutex m;
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        {
            std::lock_guard lock(m);
            bodies.push_back(req.body);
        }
        int n = ++calls;
        if (n == 1) {
            res.status = 503;
        } else if (n == 2) {
            res.status = 429;
            res.set_header("Retry-After", "0.05");
        } else {
            res.set_content(completion_body("ok"), "application/json");
        }
    });
    stub.start();
    HttpChatProvider provider(http_spec(stub));
    auto c = provider.complete(bundle(PromptKind::Repair, "s", "u"), ModelRole::Generator);
    EXPECT_EQ(c.text, "ok");
    EXPECT_EQ(calls.load(), 3);
    EXPECT_EQ(c.meta.transport_retries, 2);
    ASSERT_EQ(bodies.size(), 3u);
    EXPECT_EQ(bodies[0], bodies[1]);
    EXPECT_EQ(bodies[1], bodies[2]);
}

TEST(LlmClient, HttpProviderGivesUpAfterThreeRetries) {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 429;
        res.set_header("Retry-After", "0");
    });
    stub.start();
    HttpChatProvider provider(http_spec(stub));
    try {
        provider.complete(bundle(PromptKind::Generate, "s", "u"), ModelRole::Generator);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RateLimited);
        EXPECT_TRUE(e.retryable());
    }
    EXPECT_EQ(calls.load(), 4);
}

TEST(LlmClient, HttpProviderDoesNotRetryClientErrors) {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 401;
    });
    stub.start();
    HttpChatProvider provider(http_spec(stub));
    EXPECT_THROW(provider.complete(bundle(PromptKind::Generate, "s", "u"), ModelRole::Generator), Error);
    EXPECT_EQ(calls.load(), 1);
}

TEST(LlmClient, UnreachableEndpointIsProviderUnavailable) {
    ProviderSpec s;
    s.endpoint = "http://127.0.0.1:1/v1/chat/completions";
    s.model_name = "m";
    s.max_transport_retries = 1;
    s.backoff_initial_ms = 1;
    s.request_timeout_s = 2;
    HttpChatProvider provider(s);
    try {
        provider.complete(bundle(PromptKind::Generate, "s", "u"), ModelRole::Generator);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
        EXPECT_TRUE(e.retryable());
    }
}

TEST(LlmClient, CredentialsNeverReachLogs) {
    const std::string secret = "sk-live-SECRET-4f9a1c";
    setenv("NETQUERY_TEST_LLM_KEY", secret.c_str(), 1);
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (++calls % 2 == 1)
            res.status = 500;
        else
            res.set_content(completion_body("ok"), "application/json");
    });
    stub.start();
    LogCapture logs;
    HttpChatProvider provider(http_spec(stub));
    auto c = provider.complete(bundle(PromptKind::Generate, "s", "u"), ModelRole::Generator);
    EXPECT_EQ(c.text, "ok");
    auto captured = logs.text();
    EXPECT_NE(captured.find("transport retry"), std::string::npos);
    EXPECT_EQ(captured.find(secret), std::string::npos);
    EXPECT_EQ(http_spec(stub).to_json().dump().find(secret), std::string::npos);
}

TEST(LlmClient, SpecParsing) {
    auto s = ProviderSpec::from_json({{"kind", "http-chat"}, {"endpoint", "https://x/v1/chat"}, {"model_name", "m"}});
    EXPECT_EQ(s.temperature, 0.0);
    EXPECT_EQ(s.request_timeout_s, 120.0);
    EXPECT_EQ(s.max_transport_retries, 3);
    EXPECT_THROW(ProviderSpec::from_json({{"kind", "telepathy"}}), Error);
    EXPECT_THROW(ProviderSpec::from_json({{"kind", "scripted"}}), Error);
    EXPECT_THROW(ProviderSpec::from_json({{"kind", "http-chat"}, {"model_name", "m"}}), Error);
}
