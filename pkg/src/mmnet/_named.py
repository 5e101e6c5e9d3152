"""Small helpers for dense arrays whose axes carry string names.

A named array is just an ``(ndarray, tuple_of_names)`` pair. These helpers
keep the bookkeeping in one place so that the probability and converse
modules can multiply and reduce factors without tracking axis positions.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def _labels(*name_lists: Sequence[str]) -> dict[str, int]:
    table: dict[str, int] = {}
    for names in name_lists:
        for nm in names:
            if nm not in table:
                table[nm] = len(table)
    if len(table) > 52:
        raise ValueError(f"too many distinct axes for einsum ({len(table)} > 52)")
    return table


def product(factors: Iterable[tuple[np.ndarray, Sequence[str]]],
            out: Sequence[str] | None = None) -> tuple[np.ndarray, tuple[str, ...]]:
    """Pointwise product of named factors, summing out axes absent from ``out``.

    With ``out=None`` the result keeps every axis, in order of first appearance.
    """
    factors = [(np.asarray(a, dtype=float), tuple(n)) for a, n in factors]
    for a, n in factors:
        if a.ndim != len(n):
            raise ValueError(f"array with {a.ndim} dims labelled by {n}")
    table = _labels(*(n for _, n in factors))
    if out is None:
        out = tuple(table)
    out = tuple(out)
    missing = [nm for nm in out if nm not in table]
    if missing:
        raise KeyError(f"output axes {missing} do not appear in any factor")
    args: list = []
    for a, n in factors:
        args.append(a)
        args.append([table[nm] for nm in n])
    args.append([table[nm] for nm in out])
    return np.einsum(*args, optimize=len(factors) > 2), out


def transpose_to(arr: np.ndarray, names: Sequence[str], order: Sequence[str]) -> np.ndarray:
    names = list(names)
    return np.transpose(arr, [names.index(nm) for nm in order])


def sum_to(arr: np.ndarray, names: Sequence[str], keep: Sequence[str]) -> np.ndarray:
    """Sum out every axis not in ``keep`` and return axes ordered as ``keep``."""
    names = list(names)
    drop = tuple(i for i, nm in enumerate(names) if nm not in keep)
    reduced = arr.sum(axis=drop) if drop else arr
    left = [nm for nm in names if nm in keep]
    return transpose_to(reduced, left, keep)


def broadcast_to_names(arr: np.ndarray, names: Sequence[str],
                       target: Sequence[str]) -> np.ndarray:
    """View ``arr`` so that it broadcasts against an array with axes ``target``."""
    names = list(names)
    present = [nm for nm in target if nm in names]
    moved = transpose_to(arr, names, present)
    shape = []
    it = iter(moved.shape)
    for nm in target:
        shape.append(next(it) if nm in names else 1)
    return moved.reshape(shape)


def flatten_axes(arr: np.ndarray, names: Sequence[str],
                 groups: Sequence[Sequence[str]]) -> np.ndarray:
    """Transpose to the concatenation of ``groups`` and merge each group into one axis.

    Within a group the merged index is row-major in the group's listed order.
    """
    order = [nm for g in groups for nm in g]
    moved = transpose_to(arr, names, order)
    sizes = []
    pos = 0
    for g in groups:
        sizes.append(int(np.prod(moved.shape[pos:pos + len(g)], dtype=np.int64)))
        pos += len(g)
    return moved.reshape(sizes)
