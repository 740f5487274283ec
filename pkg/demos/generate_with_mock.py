"""
Generating corpus-free hard negatives through a chat endpoint
=============================================================

Renders the fixed system/user prompts for a query-positive pair, sends them to
an OpenAI-compatible chat-completions endpoint with the pinned sampling
parameters (temperature 0.6, top_p 0.95, top_k 20, min_p 0.0, max_tokens
1024), and parses the "Passage 1:" .. "Passage 5:" reply.

The bundled mock server stands in for a real provider here, so the demo runs
offline and deterministically; point ChatCompletionsClient at any vllm-style
endpoint to use a real model.
"""

from hardneg import (
    ChatCompletionsClient,
    GenerationConfig,
    Passage,
    QueryPositivePair,
    generate_hard_negatives,
    render_prompt,
)
from hardneg.mockserver import MockProviderServer

pair = QueryPositivePair(
    "q1",
    "capital of France",
    Passage("d1", "", "Paris is the capital and most populous city of France."),
)

# --- the prompts -------------------------------------------------------------
prompt = render_prompt(pair)
print("=== system message ===")
print(prompt.system)
print("\n=== user message ===")
print(prompt.user)

# --- generation against the mock endpoint ------------------------------------
with MockProviderServer() as server:
    client = ChatCompletionsClient(server.url)
    config = GenerationConfig(model_id="phi4-14b")
    negatives, record = generate_hard_negatives(client, pair, config)

    print("\n=== request captured by the server ===")
    request = server.chat_requests[0]
    print({k: request[k] for k in ("model", "temperature", "top_p", "top_k", "min_p", "max_tokens")})

    print(f"\n=== parsed negatives (attempts: {record.attempts}) ===")
    for i, entry in enumerate(negatives.negatives, start=1):
        flags = record.violations[i - 1] or ["ok"]
        words = record.word_counts[i - 1]
        print(f"{i}. [{entry.source}] {words} words, {'/'.join(flags)}: {entry.passage.text[:60]}...")
