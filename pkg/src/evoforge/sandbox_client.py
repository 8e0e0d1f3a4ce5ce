"""Client side of the candidate-execution sandbox protocol.

One JSON request on the worker's stdin, one JSON response on its stdout,
logs on stderr.  The hard timeout is enforced here by killing the process;
the worker usually times itself out first and still returns a response.
"""

from __future__ import annotations

import json
import subprocess
import sys
from typing import Optional, Sequence

DEFAULT_SANDBOX_CMD = (sys.executable, "-m", "evosandbox")

#: Grace added to the worker's own limit before the process is killed.
KILL_GRACE_S = 2.0


def run_sandboxed(
    code: str,
    problem: dict,
    time_limit_s: float,
    seed: int,
    cmd: Optional[Sequence[str]] = None,
) -> dict:
    """Execute one candidate against one problem in a sandbox process."""
    request = {
        "code": code,
        "problem": problem,
        "time_limit_s": time_limit_s,
        "seed": seed,
    }
    command = list(cmd or DEFAULT_SANDBOX_CMD)
    try:
        proc = subprocess.run(
            command,
            input=json.dumps(request),
            capture_output=True,
            text=True,
            timeout=time_limit_s + KILL_GRACE_S,
        )
    except subprocess.TimeoutExpired:
        return {
            "status": "timeout",
            "trace": [],
            "evals_used": 0,
            "error_message": "sandbox killed at hard time limit",
            "wall_time_s": time_limit_s + KILL_GRACE_S,
        }
    except OSError as exc:
        return {
            "status": "error",
            "trace": [],
            "evals_used": 0,
            "error_message": f"failed to launch sandbox {command}: {exc}",
            "wall_time_s": 0.0,
        }
    try:
        return json.loads(proc.stdout)
    except json.JSONDecodeError:
        detail = proc.stderr.strip().splitlines()[-5:]
        return {
            "status": "error",
            "trace": [],
            "evals_used": 0,
            "error_message": "sandbox produced no valid response: " + " | ".join(detail),
            "wall_time_s": 0.0,
        }
