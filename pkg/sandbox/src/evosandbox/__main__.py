"""Protocol entry point: one JSON request on stdin, one JSON response on
stdout, logs on stderr.  Exit code 0 whenever a response could be written;
candidate failures are in-protocol statuses, not process failures."""

import json
import sys

from .harness import execute


def main() -> int:
    try:
        request = json.load(sys.stdin)
    except json.JSONDecodeError as exc:
        response = {
            "status": "error",
            "trace": [],
            "evals_used": 0,
            "error_message": f"request is not valid JSON: {exc}",
            "wall_time_s": 0.0,
        }
    else:
        response = execute(request)
    json.dump(response, sys.stdout)
    sys.stdout.write("\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
