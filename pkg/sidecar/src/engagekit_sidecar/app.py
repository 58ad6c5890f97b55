"""Recognizer service: POST /recognize and GET /health, JSON over HTTP.

The request dictionary must match the service's configured dictionary
exactly (order included) so score vectors index the same labels on both
sides. Stub mode is fully deterministic; model mode is a mounting point for
a real recognizer callable and answers 503 until one is provided.

Errors: 400 malformed request, 422 dictionary mismatch, 503 model not
loaded, all as ``{"error": ..., "detail": ...}``.
"""

from __future__ import annotations

from typing import Callable, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .scoring import argmax_lowest_tie, clip_digest, dictionary_sha256, stub_scores

# Default classroom action vocabulary, in canonical id order.
DEFAULT_ACTIONS: tuple[str, ...] = (
    "eating meal/snack",
    "writing on notebook/tablet",
    "typing on a laptop",
    "playing with mobile phone",
    "looking to the side/back",
    "looking down w/o reading/writing",
    "looking at laptop screen (not typing)",
    "raising hand",
    "rubbing face",
    "reading",
    "drinking",
    "yawning",
    "listening",
)


class FrameRef(BaseModel):
    path: str
    offset: int = 0


class ClipPayload(BaseModel):
    features: Optional[list[list[float]]] = None
    frame_refs: Optional[list[FrameRef]] = None


class RecognitionRequest(BaseModel):
    request_id: str
    dictionary: list[str] = Field(min_length=1)
    clip: ClipPayload
    frames_per_clip: int = 32


class RecognitionResponse(BaseModel):
    request_id: str
    label_index: int
    scores: list[float]


RecognizerFn = Callable[[RecognitionRequest], tuple[int, list[float]]]


def _error(status: int, error: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": error, "detail": detail})


def create_app(
    mode: str = "stub",
    dictionary: tuple[str, ...] = DEFAULT_ACTIONS,
    recognizer_fn: RecognizerFn | None = None,
) -> FastAPI:
    if mode not in ("stub", "model"):
        raise ValueError(f"mode must be 'stub' or 'model', got {mode!r}")
    configured = tuple(dictionary)
    dict_hash = dictionary_sha256(configured)
    app = FastAPI(title="engagekit recognizer sidecar")

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return _error(400, "malformed_request", str(exc.errors()[:3]))

    @app.get("/health")
    async def health():
        return {
            "mode": mode,
            "dictionary_sha256": dict_hash,
            "labels": len(configured),
            "model_loaded": recognizer_fn is not None,
        }

    @app.post("/recognize")
    async def recognize(request: RecognitionRequest):
        clip = request.clip
        if clip.features is None and clip.frame_refs is None:
            return _error(
                400, "malformed_request", "clip needs either features or frame_refs"
            )
        if tuple(request.dictionary) != configured:
            return _error(
                422,
                "dictionary_mismatch",
                f"request dictionary (sha256 {dictionary_sha256(tuple(request.dictionary))[:12]}) "
                f"does not match the configured one ({dict_hash[:12]})",
            )
        if mode == "model":
            if recognizer_fn is None:
                return _error(503, "model_not_loaded", "no recognizer weights configured")
            label_index, scores = recognizer_fn(request)
        else:
            digest = clip_digest(clip.model_dump(exclude_none=True))
            scores = stub_scores(request.request_id, digest, len(configured))
            label_index = argmax_lowest_tie(scores)
        return RecognitionResponse(
            request_id=request.request_id, label_index=label_index, scores=scores
        )

    return app
