import json
import subprocess
import sys

import pytest


class ProtocolDriver:
    """Minimal harness-side driver speaking the line-delimited JSON protocol."""

    def __init__(self, timeout=240.0):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "tar_transformer_plugin.serve"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self.timeout = timeout
        self.seq = 0

    def request(self, payload: dict) -> dict:
        self.seq += 1
        message = {"seq": self.seq, **payload}
        self.proc.stdin.write(json.dumps(message) + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        assert line, "plugin closed stdout"
        reply = json.loads(line)
        assert reply["seq"] == self.seq, f"stale seq {reply['seq']}, expected {self.seq}"
        return reply

    def close(self):
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.wait()


@pytest.fixture
def driver():
    d = ProtocolDriver()
    yield d
    d.close()


@pytest.fixture
def pool_file(tmp_path):
    """20-doc pool with two obvious term clusters."""
    path = tmp_path / "pool.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for i in range(20):
            relevant = i % 4 == 0
            words = (
                ["positive", "signal", "match", f"alpha{i}"]
                if relevant
                else ["negative", "noise", "filler", f"beta{i}"]
            )
            f.write(json.dumps({"doc_id": f"d{i:02d}", "text": " ".join(words * 3)}) + "\n")
    return str(path)


POOL_RELEVANT = [f"d{i:02d}" for i in range(0, 20, 4)]
POOL_ALL = [f"d{i:02d}" for i in range(20)]
