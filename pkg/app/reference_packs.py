# app/reference_packs.py
"""Reference packs: JSON metadata about canonical attack settings and the
hardware readings they produced.

Packs live in ``settings.reference_dir`` (one JSON file per pack). They hold
two lists: ``canonical_attacks`` (named frequency/amplitude pairs used as
scenario defaults) and ``measurements`` (module, attack, original and attacked
readings). Measurements are documentation only; nothing in the simulator is
checked against them. Packs are loaded lazily and cached on the directory's
per-file mtimes; a missing or unreadable directory degrades to empty lists.
"""
import json
import logging
from pathlib import Path

from config import settings

_LOG = logging.getLogger(__name__)

_PACKS_CACHE = None
_PACKS_MTIME = None


def _pack_files(directory: Path) -> list[Path]:
    return sorted(p for p in directory.glob("*.json") if p.is_file())


def _signature(directory: Path):
    """(name, mtime_ns) of every pack, so edits, additions and removals all invalidate."""
    try:
        if not directory.is_dir():
            return None
        return tuple((p.name, p.stat().st_mtime_ns) for p in _pack_files(directory))
    except OSError:
        return None


def _read_pack(path: Path) -> dict | None:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        _LOG.warning("reference_pack_load_failed: %s: %s", path.name, exc)
        return None
    return data if isinstance(data, dict) else None


def _load_packs() -> list[dict]:
    global _PACKS_CACHE, _PACKS_MTIME
    directory = Path(settings.reference_dir)
    sig = _signature(directory)
    if _PACKS_CACHE is not None and sig == _PACKS_MTIME:
        return _PACKS_CACHE
    packs = []
    if sig is not None:
        try:
            packs = [pack for pack in map(_read_pack, _pack_files(directory)) if pack is not None]
        except OSError as exc:
            _LOG.warning("reference_packs_load_failed: %s", exc)
    _PACKS_CACHE, _PACKS_MTIME = packs, sig
    return packs


def _number(value):
    try:
        out = float(value)
    except (TypeError, ValueError):
        return None
    return out if out == out else None


def canonical_attacks() -> list[dict]:
    """Every well-formed named attack across packs; first pack wins on a name clash."""
    seen = set()
    out = []
    for pack in _load_packs():
        for entry in pack.get("canonical_attacks") or []:
            if not isinstance(entry, dict):
                continue
            name = str(entry.get("name") or "").strip().lower()
            freq = _number(entry.get("freq_hz"))
            vs = _number(entry.get("vs_volt"))
            if not name or name in seen or freq is None or freq <= 0 or vs is None:
                continue
            seen.add(name)
            out.append({**entry, "name": name, "freq_hz": freq, "vs_volt": vs})
    return out


def canonical_attack(name: str) -> dict | None:
    key = str(name or "").strip().lower()
    for entry in canonical_attacks():
        if entry["name"] == key:
            return entry
    return None


def measurements(module_type: str | None = None) -> list[dict]:
    """Measured hardware rows, optionally filtered by ``type`` (case-insensitive)."""
    wanted = str(module_type).strip().lower() if module_type else None
    rows = []
    for pack in _load_packs():
        for row in pack.get("measurements") or []:
            if not isinstance(row, dict):
                continue
            if wanted and str(row.get("type", "")).strip().lower() != wanted:
                continue
            rows.append(row)
    return rows
