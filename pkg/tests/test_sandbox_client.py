import sys

from evoforge.sandbox_client import run_sandboxed

ECHO_WORKER = (
    "import sys, json\n"
    "request = json.load(sys.stdin)\n"
    "print(json.dumps({'status': 'ok', 'trace': [3.0, 1.0], 'evals_used': 2,"
    " 'error_message': None, 'wall_time_s': 0.01, 'echo_fid': request['problem']['fid']}))\n"
)

SLEEPER_WORKER = "import time\ntime.sleep(60)\n"

NOISY_WORKER = "import sys\nprint('not json at all')\nprint('warning', file=sys.stderr)\n"

PROBLEM = {"suite": "sbox_separable", "fid": 1, "instance": 1, "dim": 2, "inner_budget": 10,
           "lb": -5.0, "ub": 5.0}


def worker_cmd(script):
    return [sys.executable, "-c", script]


class TestRunSandboxed:
    def test_response_passed_through(self):
        response = run_sandboxed("pass", PROBLEM, 5.0, seed=1, cmd=worker_cmd(ECHO_WORKER))
        assert response["status"] == "ok"
        assert response["trace"] == [3.0, 1.0]
        assert response["echo_fid"] == 1

    def test_hard_timeout_synthesized(self):
        response = run_sandboxed("pass", PROBLEM, 0.3, seed=1, cmd=worker_cmd(SLEEPER_WORKER))
        assert response["status"] == "timeout"
        assert response["trace"] == []

    def test_garbage_output_is_error(self):
        response = run_sandboxed("pass", PROBLEM, 5.0, seed=1, cmd=worker_cmd(NOISY_WORKER))
        assert response["status"] == "error"
        assert "no valid response" in response["error_message"]

    def test_missing_binary_is_error(self):
        response = run_sandboxed("pass", PROBLEM, 5.0, seed=1, cmd=["/nonexistent/worker"])
        assert response["status"] == "error"
        assert "failed to launch" in response["error_message"]
