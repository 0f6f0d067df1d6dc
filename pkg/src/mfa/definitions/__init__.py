"""Shipped case-study definitions with deterministic scripted backends.

Four ready-to-run automata: a complaint-handling assistant (``arps``), a
train ticket booking flow with writer sinks (``trains``), a compassionate
communication scheme (``nvc``) and a bias-catching reformulation pattern
(``ethics``). Swap any scripted dialer for a live chat model by replacing
its ``script_file`` attribute with ``endpoint``/``model``.
"""

from pathlib import Path

DIR = Path(__file__).resolve().parent

NAMES = ("arps", "trains", "nvc", "ethics")


def path(name: str) -> Path:
    """Absolute path of a shipped definition file by short name."""
    candidate = DIR / f"{name}.mfa"
    if not candidate.exists():
        raise KeyError(f"no shipped definition named {name!r} (have {', '.join(NAMES)})")
    return candidate


def dataset_path(name: str) -> Path:
    """Absolute path of a shipped dataset CSV by short name."""
    candidate = DIR / "datasets" / f"{name}.csv"
    if not candidate.exists():
        raise KeyError(f"no shipped dataset named {name!r}")
    return candidate
