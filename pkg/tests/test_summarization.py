import json

import httpx
import pytest

from sac.corpus import Corpus, Document
from sac.errors import BackendError, ConfigError, SummarizationError
from sac.summarization import (HttpChatBackend, StubChatBackend, SummarizationFailures, SummaryCache,
                               SummaryConfig, render_prompt, summarize_corpus, summarize_document,
                               truncate_at_word)


class Scripted:
    """Backend replaying canned answers and recording every prompt."""

    model_id = "scripted"

    def __init__(self, *answers):
        self.answers = list(answers)
        self.prompts = []

    def complete(self, system, user, *, seed=None, doc_id=None):
        self.prompts.append(user)
        return self.answers.pop(0)


DOC = Document("d.txt", "Some agreement text.")


@pytest.mark.parametrize("strategy", ["generic", "expert"])
def test_prompt_goldens(golden, strategy):
    system, user = render_prompt(strategy, 150, "DOC")
    expected = golden(f"{strategy}_user.txt").replace("{char_length}", "150").replace("{document_content}", "DOC")
    assert system == golden(f"{strategy}_system.txt")
    assert user == expected


def test_generic_prompt_slots():
    _, user = render_prompt("generic", 150, "DOC")
    assert "maximum 150 characters long" in user and user.endswith("DOC")


def test_expert_prompt_slots():
    _, user = render_prompt("expert", 300, "DOC")
    assert "must be concise and under 300 characters" in user and user.endswith("DOC")


def test_prompt_preconditions():
    with pytest.raises(ValueError):
        render_prompt("generic", 1, "")
    with pytest.raises(ConfigError):
        render_prompt("poetic", 150, "DOC")


def test_braces_in_document_survive():
    _, user = render_prompt("generic", 150, "clause {char_length} {x}")
    assert user.endswith("clause {char_length} {x}")


def test_accepted_first_try():
    s = summarize_document(DOC, SummaryConfig(), Scripted("x" * 150))
    assert (len(s.text), s.attempts, s.truncated) == (150, 1, False)


def test_within_tolerance():
    s = summarize_document(DOC, SummaryConfig(), Scripted("x" * 168))
    assert (len(s.text), s.attempts) == (168, 1)


def test_retry_with_reduced_length():
    client = Scripted("x" * 210, "y" * 160)
    s = summarize_document(DOC, SummaryConfig(), client)
    assert (s.text, s.attempts, s.truncated) == ("y" * 160, 2, False)
    assert "maximum 150 characters" in client.prompts[0]
    assert "maximum 110 characters" in client.prompts[1]  # 150 - (210 - 170)
    assert s.requested_length == 150


def test_retry_floor():
    client = Scripted("x" * 900, "y" * 100)
    summarize_document(DOC, SummaryConfig(), client)
    assert "maximum 40 characters" in client.prompts[1]


def test_truncates_after_retries():
    words = ("word " * 100).strip()
    s = summarize_document(DOC, SummaryConfig(max_retries=2), Scripted(words, words, words))
    assert s.truncated and s.attempts == 3
    assert len(s.text) <= 170 and s.text.endswith("word")


def test_empty_answers_fail():
    with pytest.raises(SummarizationError, match="d.txt"):
        summarize_document(DOC, SummaryConfig(max_retries=1), Scripted("", "  "))


def test_truncate_at_word():
    assert truncate_at_word("alpha beta gamma", 12) == "alpha beta"
    assert truncate_at_word("alpha beta gamma", 10) == "alpha beta"
    assert truncate_at_word("short", 10) == "short"
    assert truncate_at_word("x" * 20, 5) == "xxxxx"


def test_stub_respects_length():
    stub = StubChatBackend()
    doc = Document("a.txt", "Line one\nmore text " * 50)
    for n in (40, 150, 300):
        s = summarize_document(doc, SummaryConfig(char_length=n, model_id="stub"), stub)
        assert len(s.text) <= n and s.text.startswith("a.txt | Line one")


def _corpus(n):
    return Corpus.from_documents([Document(f"doc{i:03d}.txt", f"Agreement number {i}.\nBody.") for i in range(n)])


def test_empty_corpus():
    assert summarize_corpus(_corpus(0), SummaryConfig(), StubChatBackend()) == {}


def test_cache_hits_skip_backend(tmp_path):
    cache = SummaryCache(tmp_path)
    cfg = SummaryConfig(model_id="stub")
    first = summarize_corpus(_corpus(3), cfg, StubChatBackend(), cache)
    stub = StubChatBackend()
    again = summarize_corpus(_corpus(3), cfg, stub, cache)
    assert again == first and len(again) == 3 and stub.calls == 0
    # a different length is a different cache key
    summarize_corpus(_corpus(3), SummaryConfig(char_length=300, model_id="stub"), stub, cache)
    assert stub.calls == 3


def test_corpus_scale_with_stub():
    cfg = SummaryConfig(model_id="stub")
    out = summarize_corpus(_corpus(362), cfg, StubChatBackend(), concurrency=8)
    assert len(out) == 362
    assert all(len(s.text) <= cfg.limit for s in out.values() if not s.truncated)


def test_partial_failures_reported():
    class Flaky(StubChatBackend):
        def complete(self, system, user, *, seed=None, doc_id=None):
            if doc_id == "doc001.txt":
                raise BackendError("boom")
            return super().complete(system, user, seed=seed, doc_id=doc_id)

    with pytest.raises(SummarizationFailures) as err:
        summarize_corpus(_corpus(3), SummaryConfig(), Flaky())
    assert set(err.value.failures) == {"doc001.txt"}
    assert set(err.value.summaries) == {"doc000.txt", "doc002.txt"}


def test_http_backend_payload_and_retry():
    seen = []

    def handler(request):
        seen.append(request)
        if len(seen) == 1:
            return httpx.Response(429, text="slow down")
        return httpx.Response(200, json={"choices": [{"message": {"content": " A short summary. "}}]})

    client = HttpChatBackend("http://llm.test", "gpt-4o-mini", api_key="k",
                             transport=httpx.MockTransport(handler), sleep=lambda s: None)
    s = summarize_document(DOC, SummaryConfig(seed=7), client)
    assert s.text == "A short summary."
    body = json.loads(seen[-1].content)
    assert seen[-1].url.path == "/v1/chat/completions"
    assert seen[-1].headers["authorization"] == "Bearer k"
    assert body["model"] == "gpt-4o-mini" and body["seed"] == 7
    assert [m["role"] for m in body["messages"]] == ["system", "user"]


def test_http_backend_gives_up():
    client = HttpChatBackend("http://llm.test", "m", transport=httpx.MockTransport(lambda r: httpx.Response(503)),
                             sleep=lambda s: None, max_attempts=3)
    with pytest.raises(SummarizationError, match="after 3 attempts"):
        summarize_document(DOC, SummaryConfig(), client)


def test_http_client_error_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    client = HttpChatBackend("http://llm.test", "m", transport=httpx.MockTransport(handler), sleep=lambda s: None)
    with pytest.raises(SummarizationError, match="401"):
        summarize_document(DOC, SummaryConfig(), client)
    assert len(calls) == 1
