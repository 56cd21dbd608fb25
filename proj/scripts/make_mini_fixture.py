#!/usr/bin/env python3
"""Regenerate tests/fixtures/mini: a 3-run, 4-query, 12-passage collection with
replay transcripts for the umbrela prompt.

Cache keys are computed here independently of the C++ code (template bodies
are read from the header's string literals), so the fixture doubles as a
cross-implementation check of prompt digests and cache keys.
"""
import hashlib
import json
import pathlib
import re

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "tests" / "fixtures" / "mini"
MODEL = "mini-judge"

QUERIES = {
    "q1": "what are best foods to lower cholesterol",
    "q2": "how do bounty hunters get paid",
    "q3": "symptoms of vitamin d deficiency",
    "q4": "how long does it take to boil an egg",
}

PASSAGES = {
    "d01": "Soluble fiber found in oat bran, barley, beans and lentils lowers cholesterol.",
    "d02": "Cholesterol is a waxy substance made by the liver.",
    "d03": "The stock market closed higher on Tuesday.",
    "d04": "Bail recovery agents are usually paid 10 to 20 percent of the bond.",
    "d05": "Bounty is a brand of paper towels.",
    "d06": "A bounty hunter earns a percentage of the bail amount once the fugitive is returned.",
    "d07": "Vitamin D is produced in the skin after sun exposure.",
    "d08": "Low vitamin D can cause fatigue, bone pain and muscle weakness, among other things.",
    "d09": "Vitamins are sold in many grocery stores.",
    "d10": "Eggs are a common breakfast food in many countries.",
    "d11": "Boil eggs for 9 to 12 minutes for hard yolks, 6 minutes for soft.",
    "d12": "Eggs need roughly ten minutes in boiling water; cool them in ice water after.",
}

# (query, doc, human label, raw model output)
POOL = [
    ("q1", "d01", 3, "##final score: 3"),
    ("q1", "d02", 1, "##M: 2\n##T: 2\n##O: 2"),
    ("q1", "d03", 0, "##final score: 0"),
    ("q2", "d04", 2, "##final score: 2"),
    ("q2", "d05", 0, "0"),
    ("q2", "d06", 3, "Here are the scores:\nM: 3\nT: 3\nO: 3"),
    ("q3", "d07", 1, "##final score: 1"),
    ("q3", "d08", 2, "##final score: 3"),
    ("q3", "d09", 0, " 1: 2"),
    ("q4", "d10", 0, "##final score: 1"),
    ("q4", "d11", 3, "##final score: 3"),
    ("q4", "d12", 2, "## Step 1: M = 2\n## Step 2: T = 3\n## final score: 2"),
]

# run tag -> query -> docs in rank order (unique scores descending)
RUNS = {
    "alpha": {
        "q1": ["d01", "d02", "d03", "d10"],
        "q2": ["d06", "d04", "d05", "d01"],
        "q3": ["d08", "d07", "d09", "d12"],
        "q4": ["d11", "d12", "d10", "d03"],
    },
    "beta": {
        "q1": ["d02", "d01", "d05", "d03"],
        "q2": ["d04", "d05", "d06", "d08"],
        "q3": ["d07", "d09", "d08", "d01"],
        "q4": ["d12", "d10", "d11", "d02"],
    },
    "gamma": {
        "q1": ["d03", "d12", "d02", "d01"],
        "q2": ["d05", "d09", "d04", "d06"],
        "q3": ["d09", "d07", "d03", "d08"],
        "q4": ["d10", "d12", "d04", "d11"],
    },
}


def template_body(name):
    header = (ROOT / "include" / "umbrela" / "prompt_kit.hpp").read_text()
    m = re.search(r"inline constexpr std::string_view %s =(.*?);\n" % name, header, re.S)
    literals = re.findall(r'"((?:[^"\\]|\\.)*)"', m.group(1))
    return "".join(literals).encode().decode("unicode_escape")


def render(body, query, passage):
    head, rest = body.split("{query}")
    mid, tail = rest.split("{passage}")
    return head + query + mid + passage + tail


def sha256(s):
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def cache_key(model, digest, temperature="0", max_tokens=256, batch=1):
    canon = (f"umbrela-cache-v1\nmodel={model}\nprompt_digest={digest}\n"
             f"temperature={temperature}\nmax_output_tokens={max_tokens}\nbatch_size={batch}\n")
    return sha256(canon)


def main():
    body = template_body("kUmbrelaBody")
    (OUT / "runs").mkdir(parents=True, exist_ok=True)

    with open(OUT / "queries.tsv", "w", newline="\n") as f:
        for qid, text in QUERIES.items():
            f.write(f"{qid}\t{text}\n")
    with open(OUT / "passages.jsonl", "w", newline="\n") as f:
        for did, text in PASSAGES.items():
            f.write(json.dumps({"id": did, "text": text}) + "\n")
    with open(OUT / "qrels.txt", "w", newline="\n") as f:
        for qid, did, label, _ in sorted(POOL):
            f.write(f"{qid} 0 {did} {label}\n")
    for tag, rankings in RUNS.items():
        with open(OUT / "runs" / f"{tag}.run", "w", newline="\n") as f:
            for qid, docs in rankings.items():
                for rank, did in enumerate(docs, 1):
                    f.write(f"{qid} Q0 {did} {rank} {10 - rank}.5 {tag}\n")

    with open(OUT / "transcripts.jsonl", "w", newline="\n") as f, \
         open(OUT / "expected_keys.tsv", "w", newline="\n") as keys:
        for qid, did, _, raw in POOL:
            text = render(body, QUERIES[qid], PASSAGES[did])
            digest = sha256(text)
            key = cache_key(MODEL, digest)
            keys.write(f"{qid}\t{did}\t{digest}\t{key}\n")
            f.write(json.dumps({"cache_key": key, "model": MODEL, "prompt_digest": digest,
                                "raw_output": raw, "created_at": "2025-01-01T00:00:00Z"},
                               sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
