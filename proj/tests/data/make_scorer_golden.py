"""Writes the scorer golden transcript.

The expected log-probabilities are evaluated here by hand from the
interpolated model with no counts: every bigram and unigram term is 1/V and
only the segment term depends on the request.
"""
import json
import math
import pathlib

TYPES = ["the", "document", "mainly", "discusses", "solar", "panel"]
V = len(TYPES) + 1  # plus the unknown-word bucket
W_BI, W_UNI, W_SEG = 0.4, 0.2, 0.4


def seg_prob(word, segment):
    known = word if word in TYPES else None
    count = sum(1 for w in segment if (w if w in TYPES else None) == known)
    return (count + 1.0) / (len(segment) + V)


def logprob(word, segment):
    return math.log(W_BI * (1.0 / V) + W_UNI * (1.0 / V) + W_SEG * seg_prob(word, segment))


requests = [
    {"rid": 1, "segment": ["solar", "panel", "solar"],
     "prompt": ["the", "document", "mainly", "discusses", "solar", "panel"],
     "phrase_start": 4, "phrase_len": 2},
    {"rid": 7, "segment": ["wind"], "prompt": ["wind", "turbine"],
     "phrase_start": 0, "phrase_len": 2},
]
responses = []
for r in requests:
    words = r["prompt"][r["phrase_start"]:r["phrase_start"] + r["phrase_len"]]
    responses.append({"rid": r["rid"],
                      "token_logprobs": [logprob(w, r["segment"]) for w in words]})

here = pathlib.Path(__file__).parent
with open(here / "scorer_golden_requests.jsonl", "w") as f:
    for r in requests:
        f.write(json.dumps(r) + "\n")
    f.write('{"rid": 3, "segment": "not a list"}\n')
with open(here / "scorer_golden_responses.jsonl", "w") as f:
    for r in responses:
        f.write(json.dumps(r) + "\n")
    f.write(json.dumps({"rid": -1, "error": "malformed request"}) + "\n")
with open(here / "scorer_golden_types.json", "w") as f:
    f.write(json.dumps(TYPES) + "\n")
