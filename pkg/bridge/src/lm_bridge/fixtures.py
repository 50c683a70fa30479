"""Golden conformance transcripts.

The transcript schema is the replay format the syntax-smc client consumes:
{"exchanges": [{"path": ..., "request": ..., "response": ...}, ...]} where
requests are matched on (path, canonical JSON).  Responses are produced by the
same model code the live server runs, so a transcript written here is exactly
what an HTTP round trip would have returned.
"""

import json
from .model import BridgeModel

DEFAULT_TEXTS = ("the dog", "a bird sings", "the morning light")


def conformance_fixtures(seed=0, texts=DEFAULT_TEXTS):
    """Build a replayable transcript covering scoring, paging, tags, tokenize."""
    model = BridgeModel(seed=seed)
    exchanges = []
    seen = set()

    def add(path, request, response):
        key = (path, json.dumps(request, sort_keys=True, separators=(",", ":")))
        if key in seen:
            return
        seen.add(key)
        exchanges.append({"path": path, "request": request, "response": response})

    for text in texts:
        words = text.split()
        for count in range(1, len(words) + 1):
            sub = " ".join(words[:count])
            add("/v1/tokenize", {"text": sub}, model.tokenize_page(sub))
        tokens, _ = model.tokenizer.tokenize(text)
        for cut in range(len(tokens) + 1):
            prefix = tokens[:cut]
            add("/v1/next_token", {"prefix_tokens": prefix},
                model.next_token_page(tuple(prefix)))
            add("/v1/tags", {"prefix_tokens": prefix}, model.tag_page(tuple(prefix)))
        for cut in range(len(tokens)):
            add("/v1/score",
                {"prefix_tokens": tokens[:cut], "token_id": tokens[cut]},
                model.score_page(tuple(tokens[:cut]), tokens[cut]))
    return {"exchanges": exchanges}


def write_conformance_fixtures(path, seed=0, texts=DEFAULT_TEXTS):
    payload = conformance_fixtures(seed=seed, texts=texts)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=1)
        handle.write("\n")
    return payload
