"""Toy external scorer that opts into pipelined requests via the handshake."""
import json
import sys

print(json.dumps({"protocol_version": 1, "concurrent": True}), flush=True)
for line in sys.stdin:
    request = json.loads(line)
    scores = [float(i) for i in range(len(request["candidates"]))]
    print(json.dumps({"question_id": request["question_id"], "scores": scores}), flush=True)
