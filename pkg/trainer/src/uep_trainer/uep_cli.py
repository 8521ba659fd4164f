"""Subprocess boundary to the planning CLI.

The trainer talks to the planner exclusively through its command-line
interface and file formats: profiles go out as JSON arrays, block plans
come back as the JSON printed by ``uep plan-block``. Keeping the
boundary here means nothing else in this package imports the planner.
"""

from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

from .errors import TrainerError


def require_uep() -> str:
    exe = shutil.which("uep")
    if exe is None:
        raise TrainerError(
            "the `uep` planning CLI is not on PATH; install the planner "
            "package or pass a pre-computed plan file instead"
        )
    return exe


def plan_block(profile_path: str | Path, snr_db: float = 0.0) -> dict:
    """Run ``uep plan-block`` on a profile file and parse the plan JSON."""
    exe = require_uep()
    proc = subprocess.run(
        [exe, "plan-block", "--profile", str(profile_path), "--snr-db", str(snr_db)],
        capture_output=True, text=True,
    )
    if proc.returncode != 0:
        raise TrainerError(
            f"uep plan-block failed (exit {proc.returncode}): {proc.stderr.strip()}"
        )
    try:
        return json.loads(proc.stdout)
    except json.JSONDecodeError as exc:
        raise TrainerError(f"uep plan-block emitted unparseable JSON: {exc}") from exc


def load_plan(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            plan = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TrainerError(f"cannot read plan file {path}: {exc}") from exc
    if not isinstance(plan, dict):
        raise TrainerError(f"plan file {path} does not hold a JSON object")
    return plan
