"""Optional remote text-in/text-out planner backend.

A generic client posts the instruction to an external endpoint and expects a
reply of the documented shape; outputs are validated against the same
precedence rules as the grammar, and any transport or validation failure
falls back to the grammar backend with a warning.

Reply format (plain text):

    ids: 1 2 3 4 5
    step: <description> | <primitive> | key=value ...
    step: ...

Endpoint and credentials come from GIFTWRAP_PLANNER_URL and
GIFTWRAP_PLANNER_TOKEN; no vendor specifics live in the core types.
"""

from __future__ import annotations

import ast
import os
import urllib.request
import warnings

from .grammar import Instruction, PlanStep, SubTaskSequence, decompose_steps, plan_subtask_ids

ENV_URL = "GIFTWRAP_PLANNER_URL"
ENV_TOKEN = "GIFTWRAP_PLANNER_TOKEN"


class RemoteBackendError(RuntimeError):
    pass


def _post(url: str, token: str, text: str, timeout: float) -> str:
    req = urllib.request.Request(url, data=text.encode("utf-8"), method="POST")
    req.add_header("Content-Type", "text/plain; charset=utf-8")
    if token:
        req.add_header("Authorization", f"Bearer {token}")
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return resp.read().decode("utf-8")


def parse_remote_reply(reply: str) -> tuple[SubTaskSequence, list[PlanStep]]:
    ids: list[int] | None = None
    steps: list[PlanStep] = []
    current_subtask = None
    for line in reply.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("ids:"):
            ids = [int(tok) for tok in line[4:].split()]
        elif line.startswith("step:"):
            parts = [p.strip() for p in line[5:].split("|")]
            if len(parts) < 2:
                raise RemoteBackendError(f"malformed step line: {line!r}")
            desc, prim = parts[0], parts[1]
            args = {}
            if len(parts) > 2 and parts[2]:
                for tok in parts[2].split():
                    key, val = tok.split("=", 1)
                    args[key] = ast.literal_eval(val)
            if prim == "announce" and "message" in args:
                for sid in range(1, 6):
                    if f"sub-task {sid}" in desc:
                        current_subtask = sid
            steps.append(PlanStep(desc, prim, args, current_subtask))
        else:
            raise RemoteBackendError(f"unexpected reply line: {line!r}")
    if ids is None:
        raise RemoteBackendError("reply carries no id sequence")
    return SubTaskSequence(ids=ids), steps


class RemoteBackend:
    """Blocking client; never mutates shared state."""

    def __init__(self, url: str | None = None, token: str | None = None,
                 timeout: float = 10.0, transport=None):
        self.url = url or os.environ.get(ENV_URL, "")
        self.token = token or os.environ.get(ENV_TOKEN, "")
        self.timeout = timeout
        self._transport = transport or _post

    @property
    def configured(self) -> bool:
        return bool(self.url)

    def plan(self, instruction: Instruction) -> tuple[SubTaskSequence, list[PlanStep]]:
        if not self.configured:
            raise RemoteBackendError(f"remote backend unconfigured (set {ENV_URL})")
        reply = self._transport(self.url, self.token, instruction.text,
                                self.timeout)
        return parse_remote_reply(reply)


def plan_with_fallback(instruction: Instruction,
                       backend: RemoteBackend | None = None
                       ) -> tuple[SubTaskSequence, list[PlanStep], str]:
    """Remote backend when configured and valid, else the grammar; the third
    element names the backend that produced the result."""
    if backend is not None and backend.configured:
        try:
            ids, steps = backend.plan(instruction)
            return ids, steps, "remote"
        except (RemoteBackendError, ValueError, OSError) as exc:
            warnings.warn(f"remote planner failed ({exc}); falling back to "
                          "the grammar backend")
    return plan_subtask_ids(instruction), decompose_steps(instruction), "grammar"
