"""Completion API clients.

HttpCompletionClient posts OpenAI-style completion requests; credentials and
endpoint come from the environment (DATAPREP_API_KEY, DATAPREP_API_BASE).
MockCompletionClient serves canned responses for tests and dry runs.
"""

from __future__ import annotations

import os


class ClientError(Exception):
    pass


class HttpCompletionClient:  # pragma: no cover - network path
    def __init__(self, api_base: str | None = None, api_key: str | None = None,
                 timeout: float = 60.0):
        self.api_base = api_base or os.environ.get(
            "DATAPREP_API_BASE", "https://api.openai.com/v1"
        )
        self.api_key = api_key or os.environ.get("DATAPREP_API_KEY")
        if not self.api_key:
            raise ClientError("no API key: set DATAPREP_API_KEY")
        self.timeout = timeout

    def complete(self, request: dict) -> dict:
        import requests

        response = requests.post(
            f"{self.api_base}/completions",
            json=request,
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout,
        )
        response.raise_for_status()
        return response.json()


class MockCompletionClient:
    """Deterministic canned responses keyed by prompt; unknown prompts fail."""

    def __init__(self, responses: dict[str, dict] | None = None,
                 default: dict | None = None):
        self.responses = responses or {}
        self.default = default
        self.requests: list[dict] = []

    def complete(self, request: dict) -> dict:
        self.requests.append(request)
        prompt = request.get("prompt", "")
        if prompt in self.responses:
            return self.responses[prompt]
        if self.default is not None:
            return self.default
        raise ClientError(f"no canned response for prompt: {prompt[:80]!r}")


def make_response(top_logprobs: dict[str, float]) -> dict:
    """Provider-shaped single-token completion response for tests."""
    best = max(top_logprobs, key=top_logprobs.get) if top_logprobs else ""
    return {
        "choices": [{
            "text": best,
            "logprobs": {
                "tokens": [best],
                "token_logprobs": [top_logprobs.get(best)],
                "top_logprobs": [dict(top_logprobs)],
            },
        }]
    }
