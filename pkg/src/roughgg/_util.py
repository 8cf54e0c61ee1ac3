"""Small shared helpers: FFT worker caps, atomic output, float formatting."""

from __future__ import annotations

import contextlib
import json
import os
import tempfile


def thread_cap() -> int | None:
    """Worker cap from ROUGHGG_THREADS (None = library default: all cores)."""
    raw = os.environ.get("ROUGHGG_THREADS")
    if not raw:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


@contextlib.contextmanager
def fft_context():
    """scipy.fft worker context honoring ROUGHGG_THREADS."""
    cap = thread_cap()
    if cap is None:
        yield
        return
    import scipy.fft

    with scipy.fft.set_workers(cap):
        yield


def format_float(x: float) -> str:
    """17 significant digits: reproducible and round-trip exact."""
    return format(float(x), ".17g")


def _json_default(obj):
    import numpy as np

    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def _render(obj, indent: int, out: list) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, val) in enumerate(obj.items()):
            out.append(f"{pad}  {json.dumps(str(key))}: ")
            _render(val, indent + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, val in enumerate(obj):
            out.append(pad + "  ")
            _render(val, indent + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    else:
        out.append(json.dumps(obj))


def dumps_json(obj) -> str:
    """JSON with every float printed at 17 significant digits."""
    normalized = json.loads(json.dumps(obj, default=_json_default))
    out: list = []
    _render(normalized, 0, out)
    return "".join(out) + "\n"


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file + rename so interrupted runs leave no output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-roughgg-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
