"""Text container for tensor trains and operator chains.

The format is line oriented:

    tttensor 1
    kind tt            (or: kind mpo)
    L 4
    bonds 1 4 10 4 1
    core <entries ...>  (one line per core)

Core entries are flattened row-major. Trains store one decimal per entry;
operator chains (physical extent 2x2, flagged by ``kind mpo``) store real and
imaginary parts as consecutive decimals. Floats are written with ``repr`` so
reading them back is exact.
"""

from __future__ import annotations

import numpy as np

from .errors import DataFormatError, ValidationError
from .networks import MpoDensity, TTDistribution

_MAGIC = "tttensor 1"


def _format_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_tensor(path, obj) -> None:
    """Write a TTDistribution or MpoDensity to ``path``."""
    if isinstance(obj, TTDistribution):
        kind = "tt"
        if any(np.iscomplexobj(c) for c in obj.cores):
            raise ValidationError("only real-valued trains can be stored")
    elif isinstance(obj, MpoDensity):
        kind = "mpo"
    else:
        raise ValidationError(f"cannot store object of type {type(obj).__name__}")
    lines = [
        _MAGIC,
        f"kind {kind}",
        f"L {obj.length}",
        "bonds " + " ".join(str(d) for d in obj.bond_dims),
    ]
    for core in obj.cores:
        flat = np.asarray(core).reshape(-1)
        if kind == "mpo":
            flat = np.column_stack([flat.real, flat.imag]).reshape(-1)
        lines.append("core " + _format_floats(flat))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _fail(path, lineno: int, message: str):
    raise DataFormatError(f"{path}:{lineno}: {message}")


def load_tensor(path):
    """Read a tensor container; returns TTDistribution or MpoDensity."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _MAGIC:
        _fail(path, 1, f"expected header '{_MAGIC}'")
    header = {}
    for i, key in enumerate(["kind", "L", "bonds"]):
        lineno = i + 2
        if lineno - 1 >= len(lines):
            _fail(path, lineno, f"missing header line '{key}'")
        parts = lines[lineno - 1].split(maxsplit=1)
        if len(parts) != 2 or parts[0] != key:
            _fail(path, lineno, f"expected '{key} <value>'")
        header[key] = parts[1]
    kind = header["kind"]
    if kind not in ("tt", "mpo"):
        _fail(path, 2, f"unknown kind '{kind}'")
    try:
        L = int(header["L"])
        bonds = [int(tok) for tok in header["bonds"].split()]
    except ValueError as exc:
        _fail(path, 3, f"bad header value: {exc}")
    if L < 1 or len(bonds) != L + 1:
        _fail(path, 4, f"bond list length {len(bonds)} does not match L={L}")
    cores = []
    per_entry = 2 if kind == "mpo" else 1
    phys = 4
    for l in range(L):
        lineno = 5 + l
        if lineno - 1 >= len(lines):
            _fail(path, lineno, f"missing core {l}")
        parts = lines[lineno - 1].split()
        if not parts or parts[0] != "core":
            _fail(path, lineno, f"expected core {l}")
        expected = phys * bonds[l] * bonds[l + 1] * per_entry
        if len(parts) - 1 != expected:
            _fail(path, lineno, f"core {l} has {len(parts) - 1} entries, expected {expected}")
        try:
            values = np.array([float(tok) for tok in parts[1:]])
        except ValueError as exc:
            _fail(path, lineno, f"bad entry in core {l}: {exc}")
        if kind == "mpo":
            values = values.reshape(-1, 2)
            core = (values[:, 0] + 1j * values[:, 1]).reshape(2, 2, bonds[l], bonds[l + 1])
        else:
            core = values.reshape(4, bonds[l], bonds[l + 1])
        cores.append(core)
    if len(lines) > 4 + L:
        _fail(path, 5 + L, "trailing content after last core")
    try:
        return MpoDensity(cores) if kind == "mpo" else TTDistribution(cores)
    except ValidationError as exc:
        _fail(path, 4, str(exc))
