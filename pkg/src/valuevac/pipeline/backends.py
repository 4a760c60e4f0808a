"""Model backends: a chat-completions HTTP client (remote endpoints and the
local stub server share it) and the deterministic in-process mock."""

from __future__ import annotations

import os
from dataclasses import dataclass

import requests

BACKEND_KINDS = ("remote", "stub", "mock")


class BackendError(Exception):
    pass


class BackendTimeout(BackendError):
    pass


@dataclass
class BackendDescriptor:
    kind: str = "mock"
    endpoint: str | None = None
    model: str = "gpt-4o"
    timeout_s: float = 20.0
    max_retries: int = 2
    credential_env: str | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind in ("remote", "stub") and not self.endpoint:
            raise ValueError(f"backend kind {self.kind!r} requires an endpoint")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @property
    def backend_id(self) -> str:
        if self.kind == "mock":
            return "mock"
        return f"{self.kind}:{self.model}"

    def credential(self) -> str | None:
        if not self.credential_env:
            return None
        return os.environ.get(self.credential_env)


class MockBackend:
    """Marker backend: the engine computes decisions locally and
    deterministically instead of calling out."""

    deterministic = True

    def __init__(self, descriptor: BackendDescriptor | None = None):
        self.descriptor = descriptor or BackendDescriptor(kind="mock")


class HttpChatBackend:
    """One chat-completions POST per call; retry policy lives in the engine."""

    deterministic = False

    def __init__(self, descriptor: BackendDescriptor):
        if descriptor.kind not in ("remote", "stub"):
            raise ValueError("HttpChatBackend requires a remote or stub descriptor")
        self.descriptor = descriptor
        self._session = requests.Session()

    def chat(self, system: str, user_content: list[dict] | str, timeout: float) -> str:
        payload = {
            "model": self.descriptor.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user_content},
            ],
        }
        headers = {"Content-Type": "application/json"}
        token = self.descriptor.credential()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._session.post(
                self.descriptor.endpoint, json=payload, headers=headers, timeout=timeout
            )
        except requests.Timeout as exc:
            raise BackendTimeout(f"backend timed out after {timeout}s") from exc
        except requests.RequestException as exc:
            raise BackendError(f"backend request failed: {exc}") from exc
        if resp.status_code != 200:
            raise BackendError(f"backend returned HTTP {resp.status_code}")
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc
        if not isinstance(content, str):
            raise BackendError("backend response content is not text")
        return content

    def close(self) -> None:
        self._session.close()


def make_backend(descriptor: BackendDescriptor) -> MockBackend | HttpChatBackend:
    if descriptor.kind == "mock":
        return MockBackend(descriptor)
    return HttpChatBackend(descriptor)
