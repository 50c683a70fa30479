"""HTTP front end for the bridge model, standard library only.

Endpoints (all POST, JSON in, JSON out):
  /v1/next_token  {"prefix_tokens": [ids]} -> truncated top list plus EOS and
                  leftover mass, with piece texts and word-start flags
  /v1/score      {"prefix_tokens": [ids], "token_id": id} -> exact logprob
  /v1/tokenize   {"text": str} -> token ids and word-end flags
  /v1/tags       {"prefix_tokens": [ids]} -> odd and even tag distributions

Errors: 400 for bodies that are not valid JSON, 422 for schema or range
problems, 404 for unknown paths, 503 until the model finished loading.
"""

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from .model import BridgeModel


class ApiError(Exception):
    def __init__(self, status, message):
        super().__init__(message)
        self.status = status


def _int_list(value, upper):
    if not isinstance(value, list) or not all(
        isinstance(item, int) and not isinstance(item, bool) and 0 <= item < upper
        for item in value
    ):
        raise ApiError(422, "prefix_tokens must be a list of token ids below %d" % upper)
    return value


class Bridge:
    """Routes decoded request bodies to the model."""

    def __init__(self, model):
        self.model = model

    def _field(self, body, key):
        if not isinstance(body, dict) or key not in body:
            raise ApiError(422, "missing field %r" % key)
        return body[key]

    def handle(self, path, body):
        model = self.model
        if path == "/v1/next_token":
            prefix = _int_list(self._field(body, "prefix_tokens"), model.vocab_size)
            return model.next_token_page(tuple(prefix))
        if path == "/v1/score":
            prefix = _int_list(self._field(body, "prefix_tokens"), model.vocab_size)
            token_id = self._field(body, "token_id")
            if not isinstance(token_id, int) or isinstance(token_id, bool) or \
                    not 0 <= token_id < model.vocab_size:
                raise ApiError(422, "token_id out of range")
            return model.score_page(tuple(prefix), token_id)
        if path == "/v1/tokenize":
            text = self._field(body, "text")
            try:
                return model.tokenize_page(text)
            except ValueError as exc:
                raise ApiError(422, str(exc))
        if path == "/v1/tags":
            prefix = _int_list(self._field(body, "prefix_tokens"), model.vocab_size)
            return model.tag_page(tuple(prefix))
        raise ApiError(404, "unknown endpoint %s" % path)


class BridgeHandler(BaseHTTPRequestHandler):
    server_version = "lm-bridge/0.1"

    def log_message(self, fmt, *args):
        pass

    def _reply(self, status, payload):
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_POST(self):
        if not self.server.ready.is_set():
            self._reply(503, {"error": "model is loading"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._reply(400, {"error": "request body is not valid JSON"})
            return
        try:
            payload = self.server.bridge.handle(self.path, body)
        except ApiError as exc:
            self._reply(exc.status, {"error": str(exc)})
            return
        self._reply(200, payload)


class BridgeServer:
    """Owns the HTTP listener plus the loading flag the handler checks."""

    def __init__(self, host="127.0.0.1", port=0, seed=0, preload=True):
        self.httpd = ThreadingHTTPServer((host, port), BridgeHandler)
        self.httpd.ready = threading.Event()
        self.httpd.bridge = None
        self.seed = seed
        self.thread = None
        if preload:
            self.load()

    @property
    def address(self):
        host, port = self.httpd.server_address[:2]
        return "http://%s:%d" % (host, port)

    def load(self):
        self.httpd.bridge = Bridge(BridgeModel(seed=self.seed))
        self.httpd.ready.set()

    def start(self):
        assert self.thread is None
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def stop(self):
        self.httpd.shutdown()
        if self.thread is not None:
            self.thread.join()
        self.httpd.server_close()


def main(argv=None):
    parser = argparse.ArgumentParser(prog="lm-bridge", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8711)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--fixtures", metavar="PATH",
                        help="write a conformance transcript to PATH and exit")
    args = parser.parse_args(argv)
    if args.fixtures:
        from .fixtures import write_conformance_fixtures
        payload = write_conformance_fixtures(args.fixtures, seed=args.seed)
        print("wrote %d exchanges to %s" % (len(payload["exchanges"]),
                                            args.fixtures))
        return 0
    server = BridgeServer(host=args.host, port=args.port, seed=args.seed)
    print("serving on %s (seed %d)" % (server.address, args.seed))
    server.start()
    try:
        server.thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
