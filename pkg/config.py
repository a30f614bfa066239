"""
Runtime configuration.

Values come from command-line flags, then the environment (a `.env` file next
to this module is loaded first, never overriding real variables), then the
defaults below.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import load_dotenv

from oracle import Budgets

_DOTENV_PATH = Path(__file__).with_name(".env")
load_dotenv(dotenv_path=_DOTENV_PATH, override=False)

VERSION = "1.0.0"
DEFAULT_SCENARIOS = Path(__file__).with_name("scenarios")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got '{raw}'") from None


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"{name} must be a number, got '{raw}'") from None


@dataclass
class CliConfig:
    port: int = 8350
    host: str = "0.0.0.0"
    url: str = "http://127.0.0.1:8350"
    scenarios: Path = DEFAULT_SCENARIOS
    seed: int = 0
    budgets: Budgets = field(default_factory=Budgets)
    phase_delay: float = 0.0
    timeout: float = 10.0
    log_level: str = "INFO"
    json_output: bool = False

    @classmethod
    def from_env(cls) -> "CliConfig":
        return cls(
            port=_env_int("BLOCKSBENCH_PORT", 8350),
            host=os.getenv("BLOCKSBENCH_HOST", "0.0.0.0"),
            url=os.getenv("BLOCKSBENCH_URL", "http://127.0.0.1:8350").rstrip("/"),
            scenarios=Path(os.getenv("BLOCKSBENCH_SCENARIOS") or DEFAULT_SCENARIOS),
            seed=_env_int("BLOCKSBENCH_SEED", 0),
            budgets=Budgets(
                max_states=_env_int("BLOCKSBENCH_MAX_STATES", 5_000_000),
                max_depth=_env_int("BLOCKSBENCH_MAX_DEPTH", 120),
            ),
            phase_delay=_env_float("BLOCKSBENCH_PHASE_DELAY", 0.0),
            timeout=_env_float("BLOCKSBENCH_TIMEOUT", 10.0),
            log_level=os.getenv("BLOCKSBENCH_LOG_LEVEL", "INFO").upper(),
        )

    def with_flags(self, **flags) -> "CliConfig":
        """Apply command-line values; None means the flag was not given."""
        updates = {k: v for k, v in flags.items() if v is not None}
        budgets = self.budgets
        if "max_states" in updates or "max_depth" in updates:
            budgets = Budgets(
                max_states=updates.pop("max_states", budgets.max_states),
                max_depth=updates.pop("max_depth", budgets.max_depth),
                bfs_block_limit=budgets.bfs_block_limit,
            )
        if "scenarios" in updates:
            updates["scenarios"] = Path(updates["scenarios"])
        if "url" in updates:
            updates["url"] = updates["url"].rstrip("/")
        values = {**self.__dict__, **updates, "budgets": budgets}
        return CliConfig(**values)
