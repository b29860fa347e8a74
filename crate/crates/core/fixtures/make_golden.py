"""Regenerates bench_golden.jsonl from hand-listed call sites.

Each entry gives the method's declaration lines and the call's line and
column as read off the fixture sources; prompts, ground truths, ratios and
ids are computed here independently of the Rust implementation.
"""
import hashlib
import json
import struct
from pathlib import Path

ROOT = Path(__file__).parent / "project"

# (file, class, method, decl_start, decl_end, call_line, call_col, receiver)
SITES = [
    ("com/acme/app/Main.java", "Main", "main", 8, 15, 11, 16, "sim"),
    ("com/acme/app/Main.java", "Main", "main", 8, 15, 13, 12, "sim"),
    ("com/acme/sim/Simulator.java", "Simulator", "update", 11, 20, 12, 14, "world"),
    ("com/acme/sim/Simulator.java", "Simulator", "update", 11, 20, 13, 34, "world"),
    ("com/acme/sim/Simulator.java", "Simulator", "update", 11, 20, 17, 21, "reaction"),
    ("com/acme/sim/Simulator.java", "Simulator", "drain", 22, 31, 25, 29, "r"),
    ("com/acme/sim/Simulator.java", "Simulator", "drain", 22, 31, 26, 14, "r"),
    ("com/acme/sim/Simulator.java", "Simulator", "drain", 22, 31, 27, 27, "Helper"),
    ("com/acme/util/Helper.java", "Helper", "count", 16, 22, 19, 29, "registry"),
    # Same prompt text as Helper.count: removed by deduplication.
    ("com/acme/util/Registry.java", "Registry", "count", 22, 28, 25, 29, "registry"),
]


def offset(text, line, col):
    return sum(len(l) + 1 for l in text.split("\n")[: line - 1]) + col


def call_end(text, start):
    i = text.index("(", start)
    depth = 0
    while True:
        if text[i] == "(":
            depth += 1
        elif text[i] == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1


def sample_id(*parts):
    h = hashlib.sha256()
    for p in parts:
        b = p.encode()
        h.update(struct.pack("<Q", len(b)))
        h.update(b)
    return h.hexdigest()[:16]


def main():
    seen = set()
    lines = []
    for path, cls, method, start, end, line, col, receiver in SITES:
        text = (ROOT / path).read_text()
        decl_line = text.split("\n")[start - 1]
        decl = offset(text, start, len(decl_line) - len(decl_line.lstrip()))
        at = offset(text, line, col)
        prompt = text[decl:at]
        assert prompt.endswith(receiver + ".")
        truth = text[at : call_end(text, at)]
        if prompt in seen:
            continue
        seen.add(prompt)
        ratio = (line - start + 1) / (end - start + 1)
        sample = {
            "id": sample_id(path, prompt, truth),
            "project": "project",
            "file": path,
            "class_name": cls,
            "method_name": method,
            "prompt": prompt,
            "ground_truth": truth,
            "receiver_text": receiver,
            "line": line,
            "column": col,
            "position_ratio": ratio,
            "split": "F" if ratio <= 0.5 else "M",
            "api_type": "ProjectSpecific",
        }
        lines.append(json.dumps(sample, separators=(",", ":")))
    (Path(__file__).parent / "bench_golden.jsonl").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
