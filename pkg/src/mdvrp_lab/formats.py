"""Text formats: the native instance/solution files and Cordeau MDVRP files.

Native instance file::

    NAME <id>
    DEPOTS <d>
    <x> <y>                      (d lines)
    CUSTOMERS <n> CAPACITY <C>
    <x> <y> <demand>             (n lines)

Floats are written with ``repr`` (shortest round-tripping decimal), so
write -> read is lossless.  Native solution file::

    TOUR <depot>: <c1> <c2> ...  (one line per tour, customer indices 0-based)
    COST <total length>
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import Instance, InstanceError, Solution, Tour, solution_cost, validate


class FormatError(ValueError):
    """Malformed file; the message carries the 1-based line number when known."""


def _lines(text: str) -> list[tuple[int, list[str]]]:
    out = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((no, line.split()))
    return out


def _float(tok: str, no: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"line {no}: expected a number, got {tok!r}") from None
    if not np.isfinite(v):
        raise FormatError(f"line {no}: non-finite coordinate {tok!r}")
    return v


def _int(tok: str, no: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(f"line {no}: expected an integer, got {tok!r}") from None


# -- native instance ---------------------------------------------------------------------

def write_instance(inst: Instance) -> str:
    out = [f"NAME {inst.id}" if inst.id else "NAME", f"DEPOTS {inst.n_depots}"]
    out += [f"{float(x)!r} {float(y)!r}" for x, y in inst.depots]
    out.append(f"CUSTOMERS {inst.n_customers} CAPACITY {inst.capacity}")
    out += [f"{float(x)!r} {float(y)!r} {int(q)}" for (x, y), q in zip(inst.customers, inst.demand)]
    return "\n".join(out) + "\n"


def read_instance(text: str) -> Instance:
    lines = _lines(text)
    k = 0
    name = ""
    if k < len(lines) and lines[k][1][0].upper() == "NAME":
        name = " ".join(lines[k][1][1:])
        k += 1

    def expect(keyword):
        if k >= len(lines):
            raise FormatError(f"unexpected end of file, expected {keyword}")
        no, toks = lines[k]
        if toks[0].upper() != keyword:
            raise FormatError(f"line {no}: expected {keyword}, got {toks[0]!r}")
        return no, toks

    no, toks = expect("DEPOTS")
    if len(toks) != 2:
        raise FormatError(f"line {no}: expected 'DEPOTS <count>'")
    d = _int(toks[1], no)
    if d < 1:
        raise FormatError(f"line {no}: need at least one depot")
    k += 1
    depots = []
    for _ in range(d):
        if k >= len(lines):
            raise FormatError("unexpected end of file in depot block")
        no, toks = lines[k]
        if len(toks) != 2:
            raise FormatError(f"line {no}: depot row needs 'x y'")
        depots.append((_float(toks[0], no), _float(toks[1], no)))
        k += 1
    no, toks = expect("CUSTOMERS")
    if len(toks) != 4 or toks[2].upper() != "CAPACITY":
        raise FormatError(f"line {no}: expected 'CUSTOMERS <n> CAPACITY <C>'")
    n, cap = _int(toks[1], no), _int(toks[3], no)
    if n < 1:
        raise FormatError(f"line {no}: need at least one customer")
    if cap < 1:
        raise FormatError(f"line {no}: capacity must be positive")
    k += 1
    cust, dem = [], []
    for _ in range(n):
        if k >= len(lines):
            raise FormatError("unexpected end of file in customer block")
        no, toks = lines[k]
        if len(toks) != 3:
            raise FormatError(f"line {no}: customer row needs 'x y demand'")
        cust.append((_float(toks[0], no), _float(toks[1], no)))
        dem.append(_int(toks[2], no))
        k += 1
    if k != len(lines):
        raise FormatError(f"line {lines[k][0]}: trailing content")
    try:
        return Instance(np.array(depots), np.array(cust), np.array(dem), cap, name)
    except InstanceError as exc:
        raise FormatError(str(exc)) from exc


# -- native solution -----------------------------------------------------------------------

def write_solution(inst: Instance, sol: Solution) -> str:
    out = []
    for t in sol.tours:
        out.append(f"TOUR {t.depot_index}:" + "".join(f" {c}" for c in t.visits))
    out.append(f"COST {solution_cost(inst, sol)!r}")
    return "\n".join(out) + "\n"


def read_solution(text: str, inst: Instance, cost_tol: float = 1e-6) -> Solution:
    """Parse and revalidate; rejects bad indices, infeasibility and a cost mismatch."""
    tours, cost = [], None
    for no, toks in _lines(text):
        head = toks[0].upper()
        if head == "TOUR":
            if len(toks) < 2 or not toks[1].endswith(":"):
                raise FormatError(f"line {no}: expected 'TOUR <depot>: ...'")
            dep = _int(toks[1][:-1], no)
            if not 0 <= dep < inst.n_depots:
                raise FormatError(f"line {no}: unknown depot {dep}")
            visits = tuple(_int(t, no) for t in toks[2:])
            bad = [c for c in visits if not 0 <= c < inst.n_customers]
            if bad:
                raise FormatError(f"line {no}: unknown customer index {bad[0]}")
            tours.append(Tour(dep, visits))
        elif head == "COST":
            if cost is not None or len(toks) != 2:
                raise FormatError(f"line {no}: malformed or repeated COST line")
            cost = _float(toks[1], no)
        else:
            raise FormatError(f"line {no}: unexpected keyword {toks[0]!r}")
    sol = Solution(tuple(tours))
    report = validate(inst, sol)
    if not report.is_feasible:
        raise FormatError("infeasible solution: " + "; ".join(f"{t}: {m}" for t, m in report.violations))
    if cost is None:
        raise FormatError("missing COST line")
    actual = solution_cost(inst, sol)
    if abs(actual - cost) > cost_tol:
        raise FormatError(f"COST {cost!r} does not match recomputed {actual!r}")
    return sol


# -- Cordeau MDVRP ------------------------------------------------------------------------

def parse_cordeau(text: str, name: str = "") -> Instance:
    """Parse a Cordeau-format MDVRP file (problem type 2).

    Duration limits, service times and visit patterns are read and
    ignored; the vehicle load limit must be the same at every depot.
    """
    lines = _lines(text)
    if not lines:
        raise FormatError("empty file")
    no, head = lines[0]
    if len(head) < 4:
        raise FormatError(f"line {no}: header must be 'type m n t'")
    ptype, _m, n, t = (_int(x, no) for x in head[:4])
    if ptype != 2:
        raise FormatError(f"line {no}: problem type {ptype} is not MDVRP (2)")
    if n < 1 or t < 1:
        raise FormatError(f"line {no}: need customers and depots")
    if len(lines) < 1 + t + n + t:
        raise FormatError(f"file declares {t} depots and {n} customers but has {len(lines)} lines")
    loads = []
    for no, toks in lines[1:1 + t]:
        if len(toks) < 2:
            raise FormatError(f"line {no}: depot limit row needs 'duration load'")
        _float(toks[0], no)
        loads.append(_int(toks[1], no))
    if len(set(loads)) != 1:
        raise FormatError(f"non-uniform vehicle load limits {sorted(set(loads))}")

    def node_rows(block, kind):
        pts, dem = [], []
        for no, toks in block:
            if len(toks) < 5:
                raise FormatError(f"line {no}: {kind} row needs 'id x y duration demand ...'")
            pts.append((_float(toks[1], no), _float(toks[2], no)))
            _float(toks[3], no)
            dem.append(_int(toks[4], no))
        return pts, dem

    cust, dem = node_rows(lines[1 + t:1 + t + n], "customer")
    depots, _ = node_rows(lines[1 + t + n:1 + t + n + t], "depot")
    extra = lines[1 + t + n + t:]
    if extra:
        raise FormatError(f"line {extra[0][0]}: trailing content")
    try:
        return Instance(np.array(depots), np.array(cust), np.array(dem), loads[0], name)
    except InstanceError as exc:
        raise FormatError(str(exc)) from exc


def cordeau_header(text: str) -> tuple[int, int, int, int]:
    """(type, vehicles per depot, customers, depots) as declared on line 1."""
    no, toks = _lines(text)[0]
    return tuple(_int(x, no) for x in toks[:4])


def write_cordeau(inst: Instance, vehicles: int = 0) -> str:
    """Cordeau type-2 text with zero durations/service times and one visit pattern."""
    d, n = inst.n_depots, inst.n_customers
    out = [f"2 {vehicles} {n} {d}"]
    out += [f"0 {inst.capacity}" for _ in range(d)]
    for i, ((x, y), q) in enumerate(zip(inst.customers, inst.demand), 1):
        out.append(f"{i} {float(x)!r} {float(y)!r} 0 {int(q)} 1 1 1")
    for j, (x, y) in enumerate(inst.depots, n + 1):
        out.append(f"{j} {float(x)!r} {float(y)!r} 0 0")
    return "\n".join(out) + "\n"


def load_instance(path) -> Instance:
    """Read a native instance file, or a Cordeau file when the first token is numeric."""
    text = Path(path).read_text()
    first = text.lstrip().split(None, 1)[0] if text.strip() else ""
    if first.isdigit():
        return parse_cordeau(text, Path(path).stem)
    return read_instance(text)
