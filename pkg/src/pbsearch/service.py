"""HTTP query service over an immutable profile index.

Endpoints (all responses JSON unless noted, permissive CORS headers):

  GET  /health                    -> 200 "ok" (text/plain)
  GET  /images                    -> [{"image_id": ..., "keypoint_count": ...}]
  GET  /images/{id}/keypoints     -> {"image_id": ..., "keypoints": [[x, y, word], ...]}
  POST /query                     -> [{"image_id", "score", "query_center", "match_center"}]
        body: {"keypoints": [[x, y, word], ...], "k": int (default 10)}

Scores are serialized with 6 decimal places; ranking happens on full
precision. The server never mutates the index, so any number of requests
may run concurrently.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .model import ImageBoW
from .search import ProfileIndex, query_topk_images

_CORS = {
    "Access-Control-Allow-Origin": "*",
    "Access-Control-Allow-Methods": "GET, POST, OPTIONS",
    "Access-Control-Allow-Headers": "Content-Type",
}


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _query_response_json(results, query: ImageBoW, index: ProfileIndex) -> str:
    """Hand-rolled JSON so scores carry exactly 6 decimal places."""
    items = []
    for r in results:
        qx, qy = query.coords[r.query_center_index]
        mx, my = index.center_coords(r.image_id, r.db_center_index)
        items.append(
            '{"image_id": %s, "score": %.6f, "query_center": [%s, %s], "match_center": [%s, %s]}'
            % (
                json.dumps(r.image_id),
                r.score,
                repr(float(qx)),
                repr(float(qy)),
                repr(mx),
                repr(my),
            )
        )
    return "[" + ", ".join(items) + "]"


def _parse_query_body(raw: bytes, index: ProfileIndex) -> tuple[ImageBoW, int]:
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ServiceError(400, "malformed JSON body") from None
    if not isinstance(body, dict) or "keypoints" not in body:
        raise ServiceError(400, "body must be an object with a 'keypoints' field")
    kps = body["keypoints"]
    if not isinstance(kps, list) or len(kps) < 2:
        raise ServiceError(400, "need at least 2 keypoints")
    coords = []
    words = []
    for item in kps:
        if not (isinstance(item, (list, tuple)) and len(item) == 3):
            raise ServiceError(400, "each keypoint must be [x, y, word]")
        x, y, w = item
        if not isinstance(x, (int, float)) or not isinstance(y, (int, float)):
            raise ServiceError(400, "keypoint coordinates must be numbers")
        if isinstance(w, bool) or not isinstance(w, int):
            raise ServiceError(400, "keypoint word must be an integer")
        if not 0 <= w < index.codebook_size:
            raise ServiceError(400, f"word id {w} out of range for codebook size {index.codebook_size}")
        coords.append((float(x), float(y)))
        words.append(w)
    k = body.get("k", 10)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ServiceError(400, "k must be a positive integer")
    try:
        query = ImageBoW("query", np.asarray(coords), np.asarray(words, dtype=np.int64),
                         codebook_size=index.codebook_size)
    except ValueError as e:
        raise ServiceError(400, str(e)) from None
    return query, k


class _Handler(BaseHTTPRequestHandler):
    index: ProfileIndex  # set on the server class
    ui_dir: Path | None = None

    def log_message(self, format: str, *args) -> None:  # quiet by default
        pass

    def _send(self, status: int, payload: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        for k, v in _CORS.items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, text: str) -> None:
        self._send(status, text.encode("utf-8"), "application/json")

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json(status, json.dumps({"error": message}))

    def do_OPTIONS(self) -> None:
        self._send(204, b"", "text/plain")

    def do_GET(self) -> None:
        index = self.server.index  # type: ignore[attr-defined]
        path = self.path.split("?", 1)[0]
        if path == "/health":
            self._send(200, b"ok", "text/plain")
            return
        if path == "/images":
            rows = [
                {"image_id": d.image_id, "keypoint_count": d.n}
                for d in index.data
            ]
            self._send_json(200, json.dumps(rows))
            return
        if path.startswith("/images/") and path.endswith("/keypoints"):
            image_id = path[len("/images/") : -len("/keypoints")]
            try:
                i = index.image_index(image_id)
            except KeyError:
                self._send_error_json(404, f"unknown image {image_id!r}")
                return
            kps = [
                [float(index.coords[i][j, 0]), float(index.coords[i][j, 1]), int(index.words[i][j])]
                for j in range(index.data[i].n)
            ]
            self._send_json(200, json.dumps({"image_id": image_id, "keypoints": kps}))
            return
        if self._maybe_serve_ui(path):
            return
        self._send_error_json(404, f"no such endpoint {path!r}")

    def _maybe_serve_ui(self, path: str) -> bool:
        ui = getattr(self.server, "ui_dir", None)
        if ui is None:
            return False
        rel = "index.html" if path == "/" else path.lstrip("/")
        target = (ui / rel).resolve()
        if not str(target).startswith(str(ui.resolve())) or not target.is_file():
            return False
        ctype = {
            ".html": "text/html",
            ".js": "text/javascript",
            ".css": "text/css",
            ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), ctype)
        return True

    def do_POST(self) -> None:
        index = self.server.index  # type: ignore[attr-defined]
        path = self.path.split("?", 1)[0]
        if path != "/query":
            self._send_error_json(404, f"no such endpoint {path!r}")
            return
        length = int(self.headers.get("Content-Length", "0") or "0")
        raw = self.rfile.read(length)
        try:
            query, k = _parse_query_body(raw, index)
            results = query_topk_images(query, index, k=k)
            self._send_json(200, _query_response_json(results, query, index))
        except ServiceError as e:
            self._send_error_json(e.status, str(e))


def create_server(
    index: ProfileIndex, host: str = "127.0.0.1", port: int = 0, ui_dir: str | Path | None = None
) -> ThreadingHTTPServer:
    """Build (but do not start) the HTTP server for an index.

    The index must carry keypoint coordinates (built in-process or loaded
    with its ``.kp`` sidecar) so match centers can be reported.
    """
    if index.coords is None:
        raise ValueError("index has no keypoint coordinates; rebuild or provide the .kp sidecar")
    server = ThreadingHTTPServer((host, port), _Handler)
    server.index = index  # type: ignore[attr-defined]
    server.ui_dir = Path(ui_dir) if ui_dir is not None else None  # type: ignore[attr-defined]
    return server
