import os
import sys
import time


def is_quiet():
    return os.getenv("RELAYCAP_QUIET", "0") not in ("", "0", "false", "False")


def log_event(
    execution_start: float,
    emoji: str,
    component: str,
    message: str,
):
    # stdout carries CSV/JSON, progress goes to stderr
    if is_quiet():
        return
    print(
        f"[{time.time() - execution_start:.3f}s] {emoji} {component}: {message}",
        file=sys.stderr,
        flush=True,
    )
