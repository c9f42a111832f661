"""
utils.py - Shared utility functions for the mlproc toolchain
"""
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Union

from rapidfuzz import fuzz, process

# minimum WRatio score for a "did you mean" hint
SUGGEST_CUTOFF = 70


def ci_match_label(val: str, labels: List[str]) -> Optional[str]:
    """
    Case-insensitive exact match to one of the labels.
    Returns the canonical label if found, else None.
    """
    v = val.strip().casefold()
    for lab in labels:
        if v == lab.casefold():
            return lab
    return None


def suggest(val: str, choices: Iterable[str], cutoff: int = SUGGEST_CUTOFF) -> Optional[str]:
    """
    Closest choice to `val` by fuzzy score, or None when nothing is close.
    Used for "did you mean" hints on unknown kinds, ids and commands.
    """
    choices = [c for c in choices if c != val]
    if not val or not choices:
        return None
    exact = ci_match_label(val, choices)
    if exact:
        return exact
    best = process.extractOne(val, choices, scorer=fuzz.WRatio, score_cutoff=cutoff)
    return best[0] if best else None


def write_atomic(path: Union[str, Path], content: Union[str, bytes]) -> Path:
    """
    Write `content` to a temp file next to `path`, then rename it over `path`.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
