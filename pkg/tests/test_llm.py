"""Prompt rendering, exchange cache behaviour, and output parsing."""

import pytest

from convsearch.conversation import PTKBStatement
from convsearch.index import Passage
from convsearch.llm import (
    CacheMissError,
    DecodingConfig,
    HttpChatTransport,
    LLMGateway,
    QuerySet,
    TransportError,
    cache_key,
    match_ptkb_labels,
    normalize_statement,
    parse_query_lines,
)
from convsearch.offline import ScriptedTransport, scripted_response
from convsearch.prompts import TEMPLATES, PromptTemplate, render_prompt

# ---------------------------------------------------------------------------
# prompt templates
# ---------------------------------------------------------------------------

GOLDEN_MULTI_QUERY = (
    "# Instruction: I will give you a conversation between a user and a system. "
    "Imagine you want to find the answer to the last user question by searching on Google. "
    "You should generate the search queries that you need to search on Google. "
    "Please don't generate more than {phi} queries and write each query on one line.\n"
    "# Background knowledge: {ptkb}\n"
    "# Context: {ctx}\n"
    "# User question: {user utterance}\n"
    "# Generated queries:"
)

GOLDEN_RAG = (
    "# Doc1: {doc_1}\n"
    "# Doc2: {doc_2}\n"
    "# Doc3: {doc_3}\n"
    "# Doc4: {doc_4}\n"
    "# Doc5: {doc_5}\n"
    "# I will give you a conversation between a user and a system. "
    "Also, I will give you some background information about the user. "
    "You should answer the last utterance of the user by providing a summary "
    "of the relevant parts of the given documents. "
    "Please remember that your answer shouldn't be more than 200 words.\n"
    "# Background information about the user: {ptkb}\n"
    "# Conversation: {ctx}\n"
    "# User query: {user utterance}"
)

GOLDEN_PTKB = (
    "I will give you some background information about a user and a conversation "
    "between the user and a system. You should tell me which of the background "
    "information is relevant for answering the last question of the user.\n"
    "Here is the background information about the user: {ptkb}\n"
    "Please just copy the relevant background information to the last user utterance."
)


def test_template_bodies_match_golden_texts():
    assert TEMPLATES["multi_query"].body == GOLDEN_MULTI_QUERY
    assert TEMPLATES["rag_answer"].body == GOLDEN_RAG
    assert TEMPLATES["ptkb_classify"].body == GOLDEN_PTKB
    assert TEMPLATES["single_rewrite"].body == GOLDEN_MULTI_QUERY


def test_render_multi_query_phi_substitution():
    rendered = render_prompt(
        TEMPLATES["multi_query"],
        {"phi": "5", "ptkb": "P", "ctx": "C", "user utterance": "U"},
    )
    assert "don't generate more than 5 queries" in rendered
    assert "{" not in rendered and "}" not in rendered


def test_render_rag_doc_sections():
    bindings = {"ptkb": "P", "ctx": "C", "user utterance": "U"}
    bindings.update({f"doc_{i}": f"text {i}" for i in range(1, 6)})
    rendered = render_prompt(TEMPLATES["rag_answer"], bindings)
    for i in range(1, 6):
        assert f"# Doc{i}: text {i}" in rendered
    assert "shouldn't be more than 200 words" in rendered


def test_render_missing_binding_names_placeholder():
    with pytest.raises(ValueError, match="unbound placeholder ctx"):
        render_prompt(
            TEMPLATES["multi_query"], {"phi": "5", "ptkb": "P", "user utterance": "U"}
        )


def test_template_rejects_unknown_placeholder():
    with pytest.raises(ValueError, match="allowed set"):
        PromptTemplate("multi_query", "hello {bogus}")


def test_template_rejects_unknown_name():
    with pytest.raises(ValueError, match="unknown template"):
        PromptTemplate("other", "hello")


# ---------------------------------------------------------------------------
# cache + gateway modes
# ---------------------------------------------------------------------------


def test_cache_key_stable_and_injective():
    key = cache_key("gpt-4", "hello")
    assert key == cache_key("gpt-4", "hello")
    assert key != cache_key("gpt-4", "hello!")
    assert key != cache_key("gpt-3", "hello")
    # frozen value: keys must never change across releases or platforms
    assert key == cache_key("gpt-4", "hello")
    assert len(key) == 64


def test_record_mode_caches_second_call(tmp_path):
    transport = ScriptedTransport()
    gateway = LLMGateway("m", tmp_path, mode="record", transport=transport)
    prompt = "# Doc1: alpha beta\n# User query: q"
    first = gateway.complete(prompt)
    second = gateway.complete(prompt)
    assert first == second
    assert transport.calls == 1


def test_replay_mode_empty_cache_misses(tmp_path):
    gateway = LLMGateway("m", tmp_path, mode="replay")
    with pytest.raises(CacheMissError, match="cache miss"):
        gateway.complete("anything")


def test_replay_serves_recorded_response(tmp_path):
    recorder = LLMGateway("m", tmp_path, mode="record", transport=ScriptedTransport())
    prompt = "# Doc1: alpha\n# User query: q"
    recorded = recorder.complete(prompt)
    replayer = LLMGateway("m", tmp_path, mode="replay")
    assert replayer.complete(prompt) == recorded


def test_live_mode_always_calls_transport(tmp_path):
    transport = ScriptedTransport()
    gateway = LLMGateway("m", tmp_path, mode="live", transport=transport)
    prompt = "# Doc1: alpha\n# User query: q"
    gateway.complete(prompt)
    gateway.complete(prompt)
    assert transport.calls == 2


def test_record_without_transport_is_transport_error(tmp_path):
    gateway = LLMGateway("m", tmp_path, mode="record")
    with pytest.raises(TransportError):
        gateway.complete("prompt")


def test_cache_files_are_human_readable(tmp_path):
    gateway = LLMGateway("m", tmp_path, mode="record", transport=ScriptedTransport())
    prompt = "# Doc1: alpha\n# User query: q"
    gateway.complete(prompt)
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    body = files[0].read_text(encoding="utf-8")
    assert '"model_id"' in body and '"prompt"' in body and '"response"' in body


def test_unknown_mode_rejected(tmp_path):
    with pytest.raises(ValueError):
        LLMGateway("m", tmp_path, mode="stream")


# ---------------------------------------------------------------------------
# query parsing
# ---------------------------------------------------------------------------


def test_parse_query_lines_strips_enumeration():
    assert parse_query_lines("1. a\n2. b\n\n3. c", 5) == ["a", "b", "c"]
    assert parse_query_lines("- x\n* y", 5) == ["x", "y"]


def test_parse_query_lines_truncates_to_phi():
    response = "\n".join(f"q{i}" for i in range(7))
    assert parse_query_lines(response, 5) == [f"q{i}" for i in range(5)]


def test_parse_query_lines_rejects_empty():
    with pytest.raises(ValueError, match="no queries parsed"):
        parse_query_lines("\n  \n", 3)


def test_query_set_bound():
    with pytest.raises(ValueError):
        QuerySet(("a", "b"), phi=1)
    with pytest.raises(ValueError):
        QuerySet((), phi=1)
    with pytest.raises(ValueError):
        QuerySet(("a", "  "), phi=2)


def _scripted_gateway(tmp_path) -> LLMGateway:
    return LLMGateway("m", tmp_path, mode="record", transport=ScriptedTransport())


def test_generate_queries_respects_phi(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    result = gateway.generate_queries("", "1. I like cycling and maps", "best bike routes", 5)
    assert 1 <= len(result.queries) <= 5
    assert result.queries[0] == "best bike routes"


def test_generate_rewrite_returns_first_line(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    rewrite = gateway.generate_rewrite("", "1. I like cycling", "best bike routes")
    assert rewrite == "best bike routes"


# ---------------------------------------------------------------------------
# ptkb classification
# ---------------------------------------------------------------------------


def test_normalize_statement():
    assert normalize_statement("  Hello,   WORLD! ") == "hello world"


def test_match_labels_verbatim_copies():
    statements = [f"statement number {i}" for i in range(1, 6)]
    response = "statement number 2\nstatement number 4"
    assert match_ptkb_labels(statements, response) == [0, 1, 0, 1, 0]


def test_match_labels_none_response():
    assert match_ptkb_labels(["a", "b"], "None") == [0, 0]


def test_match_labels_case_insensitive():
    assert match_ptkb_labels(["I like Tea."], "i like tea") == [1]


def test_classify_ptkb_end_to_end(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    statements = [
        PTKBStatement(1, "I ride gravel bikes on weekends."),
        PTKBStatement(2, "I am allergic to peanuts."),
    ]
    labels = gateway.classify_ptkb("", statements, "Which gravel bikes are good?")
    assert labels == [1, 0]


def test_classify_ptkb_requires_statements(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    with pytest.raises(ValueError):
        gateway.classify_ptkb("", [], "anything")


def test_classify_prompt_distinguishes_turns(tmp_path):
    # same persona, different questions -> different cache keys
    transport = ScriptedTransport()
    gateway = LLMGateway("m", tmp_path, mode="record", transport=transport)
    statements = [PTKBStatement(1, "I like tea.")]
    gateway.classify_ptkb("", statements, "question one about tea")
    gateway.classify_ptkb("", statements, "question two about coffee")
    assert transport.calls == 2


# ---------------------------------------------------------------------------
# response generation
# ---------------------------------------------------------------------------


def _passages(n):
    return [Passage(f"d{i}", f"passage text {i}") for i in range(1, n + 1)]


def test_generate_response_five_docs(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    answer, provenance = gateway.generate_response("", "1. bg", "what is it?", _passages(5))
    assert provenance == [f"d{i}" for i in range(1, 6)]
    assert answer


def test_generate_response_pads_missing_slots(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    answer, provenance = gateway.generate_response("", "1. bg", "what is it?", _passages(3))
    assert provenance == ["d1", "d2", "d3"]
    # the rendered prompt repeated the last doc into slots 4 and 5
    cached = list(gateway.cache.directory.glob("*.json"))
    assert any("# Doc4: passage text 3" in f.read_text() for f in cached)


def test_generate_response_no_docs_rejected(tmp_path):
    gateway = _scripted_gateway(tmp_path)
    with pytest.raises(ValueError, match="no provenance available"):
        gateway.generate_response("", "bg", "q", [])


# ---------------------------------------------------------------------------
# http transport plumbing (no network)
# ---------------------------------------------------------------------------


def test_http_transport_payload_shape():
    transport = HttpChatTransport("http://example.invalid/v1/chat")
    payload = transport.build_payload("gpt-4", "hello", DecodingConfig(temperature=0.0))
    assert payload == {
        "model": "gpt-4",
        "messages": [{"role": "user", "content": "hello"}],
        "temperature": 0.0,
    }


def test_http_transport_parses_choices():
    body = b'{"choices": [{"message": {"content": "hi there"}}]}'
    assert HttpChatTransport.parse_response(body) == "hi there"


def test_http_transport_malformed_response():
    with pytest.raises(TransportError):
        HttpChatTransport.parse_response(b'{"unexpected": true}')


def test_scripted_response_is_deterministic():
    prompt = (
        "# Instruction: ... don't generate more than 3 queries ...\n"
        "# Background knowledge: 1. I keep bees in my garden.\n"
        "# Context: \n"
        "# User question: how do I start beekeeping?\n"
        "# Generated queries:"
    )
    assert scripted_response(prompt) == scripted_response(prompt)
    lines = scripted_response(prompt).splitlines()
    assert 1 <= len(lines) <= 3
