"""Request loop: one JSON object per line on stdin, one reply per line on stdout.

Internal failures become {"ok": false, "error": ...} replies and the loop
keeps serving; only a closed stdin or a shutdown command ends the process.
"""

from __future__ import annotations

import json
import sys

from .model import TransformerClassifier


def emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def load_pool(pool_path: str) -> dict[str, str]:
    pool: dict[str, str] = {}
    with open(pool_path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            pool[record["doc_id"]] = record["text"]
    if not pool:
        raise ValueError(f"empty pool file: {pool_path}")
    return pool


def serve(stdin=None) -> int:
    stdin = stdin or sys.stdin
    classifier: TransformerClassifier | None = None

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"[tar-transformer-plugin] unparseable request: {exc}", file=sys.stderr)
            continue
        seq = request.get("seq")
        cmd = request.get("cmd")
        try:
            if cmd == "handshake":
                pool = load_pool(request["pool_path"])
                classifier = TransformerClassifier(
                    pool=pool,
                    pretrain_epochs=int(request.get("pretrain_epochs", 0)),
                    extra=dict(request.get("extra") or {}),
                )
                emit({"seq": seq, "ok": True, "info": classifier.hyperparameters()})
            elif cmd == "fit":
                if classifier is None:
                    raise RuntimeError("handshake required before fit")
                examples = [(e["doc_id"], int(e["label"])) for e in request["examples"]]
                if not examples:
                    raise ValueError("empty example list")
                classifier.fit(examples)
                emit({"seq": seq, "ok": True})
            elif cmd == "score":
                if classifier is None:
                    raise RuntimeError("handshake required before score")
                scores = classifier.score(list(request["doc_ids"]))
                emit({"seq": seq, "ok": True, "scores": scores})
            elif cmd == "shutdown":
                emit({"seq": seq, "ok": True})
                return 0
            else:
                emit({"seq": seq, "ok": False, "error": f"unknown cmd {cmd!r}"})
        except Exception as exc:  # stay alive; report the failure to the harness
            emit({"seq": seq, "ok": False, "error": str(exc)})
    return 0


def main() -> None:
    sys.exit(serve())


if __name__ == "__main__":
    main()
