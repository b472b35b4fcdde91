"""Drive an external classifier process over line-delimited JSON.

One request/reply JSON object per line on the child's stdin/stdout, UTF-8,
no pipelining. Every request carries a monotonically increasing "seq"
integer which the reply must echo; a reply with a stale seq is a protocol
violation. Documents travel by pool-file reference in the handshake; fit
and score messages carry doc_ids only, and fit always sends the full
reviewed set (cumulative).

Message shapes (exact key names):

  -> {"seq":n,"cmd":"handshake","pretrain_epochs":E,"pool_path":"...","extra":{...}}
  <- {"seq":n,"ok":true}
  -> {"seq":n,"cmd":"fit","examples":[{"doc_id":"...","label":1|-1},...]}
  <- {"seq":n,"ok":true}
  -> {"seq":n,"cmd":"score","doc_ids":["...",...]}
  <- {"seq":n,"ok":true,"scores":[...]}
  -> {"seq":n,"cmd":"shutdown"}
  <- {"seq":n,"ok":true}, then the process exits

Any reply may instead be {"seq":n,"ok":false,"error":"message"}.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Mapping, Sequence

DEFAULT_HANDSHAKE_TIMEOUT = 600.0  # further pre-training can be slow
DEFAULT_REQUEST_TIMEOUT = 600.0

_EOF = object()


class PluginError(RuntimeError):
    """The plugin reported a failure or misbehaved."""


class PluginProtocolError(PluginError):
    """The plugin violated the line-delimited JSON protocol."""


@dataclass(frozen=True)
class PluginSpec:
    """How to launch an external classifier and what to tell it at handshake."""

    command: tuple[str, ...]
    pretrain_epochs: int = 0
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.command:
            raise ValueError("plugin command must be nonempty")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")


class PluginSession:
    """Single-owner request/reply session with one plugin process.

    State machine: handshaken -> fitted -> closed; fit before score,
    no messages after close. Use open_plugin() to construct.
    """

    def __init__(
        self,
        spec: PluginSpec,
        request_timeout: float = DEFAULT_REQUEST_TIMEOUT,
    ):
        self.spec = spec
        self.state = "spawned"
        self._seq = 0
        self._timeout = request_timeout
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                list(spec.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise PluginError(f"failed to spawn plugin {spec.command[0]!r}: {exc}") from exc
        self._replies: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            for line in self._proc.stdout:
                line = line.strip()
                if line:
                    self._replies.put(line)
        finally:
            self._replies.put(_EOF)

    def _request(self, payload: dict, timeout: float | None = None) -> dict:
        with self._lock:
            if self.state == "closed":
                raise PluginProtocolError("session is closed")
            self._seq += 1
            seq = self._seq
            message = {"seq": seq, **payload}
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise PluginError(f"plugin pipe closed while sending {payload['cmd']!r}") from exc
            try:
                raw = self._replies.get(timeout=timeout or self._timeout)
            except queue.Empty:
                raise PluginError(
                    f"timeout after {timeout or self._timeout:.0f}s waiting for"
                    f" {payload['cmd']!r} reply"
                ) from None
            if raw is _EOF:
                raise PluginError(f"plugin terminated during {payload['cmd']}")
            try:
                reply = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise PluginProtocolError(f"unparseable reply line: {raw!r}") from exc
            if not isinstance(reply, dict):
                raise PluginProtocolError(f"reply is not a JSON object: {raw!r}")
            if reply.get("seq") != seq:
                raise PluginProtocolError(
                    f"stale reply seq {reply.get('seq')!r}, expected {seq}"
                )
            if reply.get("ok") is not True:
                raise PluginError(
                    f"plugin error on {payload['cmd']!r}: {reply.get('error', 'no message')}"
                )
            return reply

    def fit(self, examples: Sequence[tuple[str, int]]) -> None:
        """Send the full (cumulative) reviewed set for fine-tuning."""
        if self.state not in ("handshaken", "fitted"):
            raise PluginProtocolError(f"fit not allowed in state {self.state!r}")
        self._request(
            {
                "cmd": "fit",
                "examples": [{"doc_id": d, "label": y} for d, y in examples],
            }
        )
        self.state = "fitted"

    def score(self, doc_ids: Sequence[str]) -> list[float]:
        """Score documents by id; the reply must align index-for-index."""
        if self.state != "fitted":
            raise PluginProtocolError("fit must run before score")
        reply = self._request({"cmd": "score", "doc_ids": list(doc_ids)})
        scores = reply.get("scores")
        if not isinstance(scores, list):
            raise PluginProtocolError("score reply has no scores list")
        if len(scores) != len(doc_ids):
            raise PluginProtocolError(
                f"score count mismatch: got {len(scores)} for {len(doc_ids)} doc_ids"
            )
        out = []
        for i, s in enumerate(scores):
            if not isinstance(s, (int, float)) or isinstance(s, bool) or not 0.0 <= s <= 1.0:
                raise PluginProtocolError(f"score {i} out of range [0, 1]: {s!r}")
            out.append(float(s))
        return out

    def shutdown(self, timeout: float = 10.0) -> None:
        """Polite shutdown; kills the process if it ignores the request."""
        if self.state == "closed":
            return
        try:
            self._request({"cmd": "shutdown"}, timeout=timeout)
        except PluginError:
            pass
        finally:
            self.state = "closed"
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=timeout)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "PluginSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def open_plugin(
    spec: PluginSpec,
    pool_path: str,
    handshake_timeout: float = DEFAULT_HANDSHAKE_TIMEOUT,
    request_timeout: float = DEFAULT_REQUEST_TIMEOUT,
) -> PluginSession:
    """Spawn the plugin and complete the handshake (including any further
    pre-training the plugin performs before replying ok)."""
    session = PluginSession(spec, request_timeout=request_timeout)
    try:
        session._request(
            {
                "cmd": "handshake",
                "pretrain_epochs": spec.pretrain_epochs,
                "pool_path": str(pool_path),
                "extra": dict(spec.extra),
            },
            timeout=handshake_timeout,
        )
    except PluginError:
        session.state = "closed"
        session._proc.kill()
        session._proc.wait()
        raise
    session.state = "handshaken"
    return session


class PluginScorer:
    """Adapter giving a PluginSession the loop's Scorer interface."""

    def __init__(self, session: PluginSession):
        self._session = session

    def fit(self, examples: Sequence[tuple[str, int]]) -> None:
        self._session.fit(examples)

    def score(self, doc_ids: Sequence[str]) -> list[float]:
        return self._session.score(doc_ids)
