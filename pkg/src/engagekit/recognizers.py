"""HTTP client for a remote segment recognizer service.

Wire contract (JSON over HTTP):

  POST {base_url}/recognize
    {"request_id": str,
     "dictionary": [name, ...],            # order defines the score vector
     "clip": {"features": [[...], ...]}     # or {"frame_refs": [...]}
     "frames_per_clip": int}
  -> {"request_id": str, "label_index": int, "scores": [...]}

Annotation-driven runs have no pixels, so the clip payload is a one-hot
per-frame feature matrix over the dictionary, built from uniformly sampled
frames (with repetition when the segment is shorter than the clip length).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import requests

from .errors import TransportError
from .temporal import RecognizerVerdict, SegmentClip, sample_frame_offsets

TRANSIENT_STATUS = {429, 500, 502, 503, 504}


@dataclass(frozen=True)
class RemoteRecognizer:
    base_url: str
    timeout_seconds: float = 10.0
    max_attempts: int = 3
    backoff_seconds: float = 0.2

    def recognize(self, clip: SegmentClip) -> RecognizerVerdict:
        payload = self._request_payload(clip)
        body = self._post_with_retries(payload)
        return self._verdict_from(body, clip)

    def _request_payload(self, clip: SegmentClip) -> dict:
        names = list(clip.dictionary.names)
        index_of = {label_id: i for i, label_id in enumerate(clip.dictionary.ids)}
        offsets = sample_frame_offsets(len(clip.frame_labels), clip.frames_per_clip)
        features = []
        for off in offsets:
            row = [0.0] * len(names)
            row[index_of[clip.frame_labels[off]]] = 1.0
            features.append(row)
        return {
            "request_id": clip.clip_id,
            "dictionary": names,
            "clip": {"features": features},
            "frames_per_clip": clip.frames_per_clip,
        }

    def _post_with_retries(self, payload: dict) -> dict:
        url = self.base_url.rstrip("/") + "/recognize"
        last_error = "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_seconds * 2 ** (attempt - 1))
            try:
                resp = requests.post(url, json=payload, timeout=self.timeout_seconds)
            except requests.RequestException as exc:
                last_error = f"connection failed: {exc}"
                continue
            if resp.status_code in TRANSIENT_STATUS:
                last_error = f"transient HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise TransportError(
                    f"recognizer rejected request {payload['request_id']}: "
                    f"HTTP {resp.status_code} {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise TransportError(
                    f"recognizer returned non-JSON body for {payload['request_id']}: {exc}"
                ) from exc
        raise TransportError(
            f"recognizer unreachable after {self.max_attempts} attempts "
            f"({payload['request_id']}): {last_error}"
        )

    def _verdict_from(self, body: dict, clip: SegmentClip) -> RecognizerVerdict:
        try:
            index = int(body["label_index"])
            scores = [float(s) for s in body["scores"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed recognizer response: {body!r}") from exc
        if body.get("request_id") != clip.clip_id:
            raise TransportError(
                f"response id {body.get('request_id')!r} does not match {clip.clip_id!r}"
            )
        if not 0 <= index < len(clip.dictionary):
            raise TransportError(f"label_index {index} out of range")
        return RecognizerVerdict(
            label=clip.dictionary.ids[index], scores=tuple(scores)
        )
