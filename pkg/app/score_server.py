# app/score_server.py
"""
Reference scoring server: serves an n-gram model over the remote wire.

  POST /score  {"text": str, "echo": true}
  -> {"tokens": [...], "token_logprobs": [...], "byte_offsets": [[start, end], ...]}

Each request is one context starting from BOS, exactly like one
per-sentence context of the local n-gram backend.

Run:
    python -m app.score_server --model data/model.scng --port 8000
"""

import argparse
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .ngram import NgramModel, load_ngram
from .remote import char_to_byte_offsets
from .scoring import NgramBackend, ScoringRequest
from .segmentation import normalize_text, tokenize


class ScoreRequest(BaseModel):
    text: str
    echo: bool = True


class ScoreResponse(BaseModel):
    tokens: List[str]
    token_logprobs: List[Optional[float]]
    byte_offsets: List[List[int]]


def create_app(model: NgramModel) -> FastAPI:
    app = FastAPI(title="Selective Context - n-gram scoring server")
    backend = NgramBackend(model)

    @app.get("/health")
    def health():
        return {"status": "ok", "model": backend.describe()}

    @app.post("/score", response_model=ScoreResponse)
    def score(req: ScoreRequest):
        if not req.echo:
            raise HTTPException(status_code=400, detail="only echo scoring is supported")
        text = normalize_text(req.text)
        if text != req.text:
            raise HTTPException(status_code=400, detail="text must be NFC-normalized")
        tokens = tokenize(text)
        if not tokens:
            return ScoreResponse(tokens=[], token_logprobs=[], byte_offsets=[])
        logprobs = backend.context_logprobs([ScoringRequest(text=text, tokens=tuple(tokens))])[0]
        c2b = char_to_byte_offsets(text)
        return ScoreResponse(
            tokens=[t.text for t in tokens],
            token_logprobs=logprobs,
            byte_offsets=[[c2b[t.span[0]], c2b[t.span[1]]] for t in tokens],
        )

    return app


def main(argv: Optional[List[str]] = None) -> None:
    import uvicorn

    parser = argparse.ArgumentParser(description="Serve an SCNG n-gram model over the /score echo protocol.")
    parser.add_argument("--model", required=True, help="path to an SCNG model file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)

    uvicorn.run(create_app(load_ngram(args.model)), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
