"""Vehicle-indexed MILP for the MDVRP, exported as CPLEX LP text.

Variables: binary ``x_i_j_v`` (vehicle v drives node i -> node j, nodes
numbered depots first) and continuous ``z_j`` (load on arrival at
customer node j).  Vehicle v is based at depot ``v mod |D|``; arcs that
touch any other depot are fixed to zero in the Bounds section.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .core import Instance, Solution, max_tours

SENSES = ("<=", ">=", "=")


@dataclass
class Row:
    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float


@dataclass
class MilpModel:
    num_vehicles: int
    home: list[int]
    objective: dict[str, float]
    rows: list[Row]
    bounds: dict[str, tuple[float, float]]
    binaries: list[str]
    continuous: list[str]
    big_M: float
    name: str = "mdvrp"

    def rows_named(self, prefix: str) -> list[Row]:
        return [r for r in self.rows if r.name.startswith(prefix)]


def xname(i: int, j: int, v: int) -> str:
    return f"x_{i}_{j}_{v}"


def zname(j: int) -> str:
    return f"z_{j}"


def build_model(inst: Instance, num_vehicles: int | None = None) -> MilpModel:
    V = max_tours(inst) if num_vehicles is None else int(num_vehicles)
    if V < 1:
        raise ValueError("num_vehicles must be >= 1")
    d, N = inst.n_depots, inst.n_nodes
    C = inst.capacity
    dem = {d + i: int(inst.demand[i]) for i in range(inst.n_customers)}
    cust = list(range(d, N))
    M = float(inst.total_demand + max(dem.values()))
    home = [v % d for v in range(V)]
    D = inst.dist

    objective, bounds, binaries = {}, {}, []
    for v in range(V):
        for i in range(N):
            for j in range(N):
                if i == j:
                    continue
                name = xname(i, j, v)
                objective[name] = float(D[i, j])
                binaries.append(name)
                foreign = (i < d and i != home[v]) or (j < d and j != home[v])
                bounds[name] = (0.0, 0.0 if foreign else 1.0)
    continuous = [zname(j) for j in cust]
    for j in cust:
        bounds[zname(j)] = (float(dem[j]), float(C))

    rows = []
    for j in cust:  # each customer entered exactly once
        rows.append(Row(f"cover_{j}", {xname(i, j, v): 1.0 for v in range(V) for i in range(N) if i != j},
                        "=", 1.0))
    for v in range(V):  # flow conservation
        for h in range(N):
            coeffs = {xname(i, h, v): 1.0 for i in range(N) if i != h}
            coeffs.update({xname(h, j, v): -1.0 for j in range(N) if j != h})
            rows.append(Row(f"flow_{h}_{v}", coeffs, "=", 0.0))
    for v in range(V):  # leave the home depot at most once
        rows.append(Row(f"depot_{v}", {xname(home[v], j, v): 1.0 for j in cust}, "<=", 1.0))
    for v in range(V):  # capacity
        rows.append(Row(f"cap_{v}", {xname(i, j, v): float(dem[j]) for j in cust for i in range(N)
                                     if i != j}, "<=", float(C)))
    for v in range(V):  # MTZ load propagation: z_j - z_i - M x_ijv >= dem_j - M
        for i in cust:
            for j in cust:
                if i != j:
                    rows.append(Row(f"mtz_{i}_{j}_{v}",
                                    {zname(j): 1.0, zname(i): -1.0, xname(i, j, v): -M},
                                    ">=", dem[j] - M))
    return MilpModel(V, home, objective, rows, bounds, binaries, continuous, M, name=inst.id)


# -- LP text ---------------------------------------------------------------------------

def _num(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def _expr(coeffs: dict[str, float], width: int = 100) -> list[str]:
    lines, cur = [], ""
    for k, (name, c) in enumerate(coeffs.items()):
        sign = "-" if c < 0 else "+"
        term = f"{_num(abs(c))} {name}"
        piece = (f"- {term}" if c < 0 else term) if k == 0 else f" {sign} {term}"
        if len(cur) + len(piece) > width and cur:
            lines.append(cur)
            cur = piece.lstrip()
        else:
            cur += piece
    lines.append(cur)
    return lines


def export_lp(m: MilpModel) -> str:
    out = [f"\\ MDVRP model {m.name}: {m.num_vehicles} vehicles, big M {_num(m.big_M)}", "Minimize"]
    obj = _expr(m.objective)
    out.append(" obj: " + obj[0])
    out += ["   " + s for s in obj[1:]]
    out.append("Subject To")
    for r in m.rows:
        body = _expr(r.coeffs)
        body[-1] += f" {r.sense} {_num(r.rhs)}"
        out.append(f" {r.name}: " + body[0])
        out += ["   " + s for s in body[1:]]
    out.append("Bounds")
    for name, (lo, hi) in m.bounds.items():
        out.append(f" {_num(lo)} <= {name} <= {_num(hi)}")
    out.append("Binaries")
    for k in range(0, len(m.binaries), 8):
        out.append(" " + " ".join(m.binaries[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


@dataclass
class LpProblem:
    sense: str
    objective: dict[str, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    binaries: list[str] = field(default_factory=list)
    generals: list[str] = field(default_factory=list)

    @property
    def variables(self) -> list[str]:
        seen = dict.fromkeys(self.objective)
        for r in self.rows:
            seen.update(dict.fromkeys(r.coeffs))
        seen.update(dict.fromkeys(self.bounds))
        seen.update(dict.fromkeys(self.binaries))
        seen.update(dict.fromkeys(self.generals))
        return list(seen)


class LpParseError(ValueError):
    pass


_SECTIONS = {
    "minimize": "min", "minimise": "min", "minimum": "min", "min": "min",
    "maximize": "max", "maximise": "max", "maximum": "max", "max": "max",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}
_TOKEN = re.compile(r"\s*(<=|>=|=<|=>|<|>|=|[+-]|:|"
                    r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|[A-Za-z_][\w.\[\]]*|\S)")


def _tokens(text: str) -> Iterator[str]:
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or not m.group(1):
            break
        yield m.group(1)
        pos = m.end()


def _is_num(tok: str) -> bool:
    return tok[0].isdigit() or tok[0] == "."


def _parse_linear(toks: list[str], lineno: int) -> tuple[dict[str, float], list[str]]:
    """Parse ``[+-] [coef] name ...`` until a relational operator; returns rest."""
    coeffs: dict[str, float] = {}
    k = 0
    while k < len(toks) and toks[k] not in ("<=", ">=", "=", "<", ">", "=<", "=>"):
        sign = 1.0
        while k < len(toks) and toks[k] in ("+", "-"):
            sign *= -1.0 if toks[k] == "-" else 1.0
            k += 1
        coef = 1.0
        if k < len(toks) and _is_num(toks[k]):
            coef = float(toks[k])
            k += 1
        if k >= len(toks) or not (toks[k][0].isalpha() or toks[k][0] == "_"):
            raise LpParseError(f"line {lineno}: expected variable name")
        coeffs[toks[k]] = coeffs.get(toks[k], 0.0) + sign * coef
        k += 1
    return coeffs, toks[k:]


def _norm_sense(tok: str) -> str:
    return {"<": "<=", "=<": "<=", ">": ">=", "=>": ">="}.get(tok, tok)


def parse_lp(text: str) -> LpProblem:
    """Parse the LP subset emitted by :func:`export_lp` (plus common spellings)."""
    section = None
    prob = None
    statements: list[tuple[str, int, list[str]]] = []
    buf: list[str] = []
    buf_line = 0

    def flush():
        nonlocal buf
        if buf:
            statements.append((section, buf_line, buf))
        buf = []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            flush()
            section = _SECTIONS[key]
            if section in ("min", "max"):
                prob = LpProblem(sense=section)
            if section == "end":
                break
            continue
        if prob is None:
            raise LpParseError(f"line {lineno}: content before objective section")
        toks = list(_tokens(line))
        starts_new = (len(toks) >= 2 and toks[1] == ":") or section in ("bounds", "bin", "gen")
        if section == "st" and buf and not starts_new:
            # continuation unless the previous statement is already complete
            if any(t in SENSES or t in ("<", ">", "=<", "=>") for t in buf):
                flush()
                buf_line = lineno
            buf += toks
            continue
        if section in ("min", "max") and buf and not starts_new:
            buf += toks
            continue
        flush()
        buf_line = lineno
        buf = toks
    flush()
    if prob is None:
        raise LpParseError("no objective section")
    nrow = 0
    for sec, lineno, toks in statements:
        if sec in ("min", "max"):
            if len(toks) >= 2 and toks[1] == ":":
                toks = toks[2:]
            coeffs, rest = _parse_linear(toks, lineno)
            if rest:
                raise LpParseError(f"line {lineno}: relational operator in objective")
            prob.objective = coeffs
        elif sec == "st":
            name = f"R{nrow}"
            if len(toks) >= 2 and toks[1] == ":":
                name, toks = toks[0], toks[2:]
            coeffs, rest = _parse_linear(toks, lineno)
            if len(rest) < 2:
                raise LpParseError(f"line {lineno}: constraint without right-hand side")
            sense = _norm_sense(rest[0])
            sign = -1.0 if rest[1] == "-" else 1.0
            num = rest[2] if rest[1] in "+-" else rest[1]
            prob.rows.append(Row(name, coeffs, sense, sign * float(num)))
            nrow += 1
        elif sec == "bounds":
            prob.bounds.update(_parse_bound(toks, lineno, prob.bounds))
        elif sec == "bin":
            prob.binaries += toks
        elif sec == "gen":
            prob.generals += toks
    return prob


def _parse_bound(toks: list[str], lineno: int, known) -> dict[str, tuple[float, float]]:
    def number(k):
        sign = 1.0
        if toks[k] in "+-":
            sign, k = (-1.0 if toks[k] == "-" else 1.0), k + 1
        if toks[k].lower() in ("inf", "infinity"):
            return sign * float("inf"), k + 1
        return sign * float(toks[k]), k + 1

    try:
        if _is_num(toks[0]) or toks[0] in "+-":
            lo, k = number(0)
            if _norm_sense(toks[k]) != "<=":
                raise LpParseError(f"line {lineno}: unsupported bound")
            name = toks[k + 1]
            hi = known.get(name, (0.0, float("inf")))[1]
            if k + 2 < len(toks):
                hi, _ = number(k + 3)
            return {name: (lo, hi)}
        name, op = toks[0], _norm_sense(toks[1])
        if op == "=":
            v, _ = number(2)
            return {name: (v, v)}
        v, _ = number(2)
        lo, hi = known.get(name, (0.0, float("inf")))
        return {name: (v, hi) if op == ">=" else (lo, v)}
    except (IndexError, ValueError) as exc:
        raise LpParseError(f"line {lineno}: bad bound {' '.join(toks)!r}") from exc


# -- substituting solutions ----------------------------------------------------------

def solution_assignment(m: MilpModel, inst: Instance, sol: Solution) -> dict[str, float]:
    """Variable values encoding ``sol``; tours go to unused vehicles based at their depot."""
    d = inst.n_depots
    values = {name: 0.0 for name in m.binaries}
    free = {k: [v for v in range(m.num_vehicles) if m.home[v] == k] for k in range(d)}
    for tour in sol.nonempty():
        if not free[tour.depot_index]:
            raise ValueError(f"not enough vehicles based at depot {tour.depot_index}")
        v = free[tour.depot_index].pop(0)
        path = [tour.depot_index] + [d + c for c in tour.visits] + [tour.depot_index]
        load = 0
        for a, b in zip(path, path[1:]):
            values[xname(a, b, v)] = 1.0
        for c in tour.visits:
            load += int(inst.demand[c])
            values[zname(d + c)] = float(load)
    for j in range(d, inst.n_nodes):
        values.setdefault(zname(j), float(inst.demand[j - d]))
    return values


def check_assignment(m: MilpModel | LpProblem, values: dict[str, float], tol: float = 1e-9) -> list[str]:
    """Names of violated rows and bounds."""
    bad = []
    for r in m.rows:
        lhs = sum(c * values.get(n, 0.0) for n, c in r.coeffs.items())
        ok = {"<=": lhs <= r.rhs + tol, ">=": lhs >= r.rhs - tol, "=": abs(lhs - r.rhs) <= tol}[r.sense]
        if not ok:
            bad.append(r.name)
    for name, (lo, hi) in m.bounds.items():
        v = values.get(name, 0.0)
        if v < lo - tol or v > hi + tol:
            bad.append(f"bound:{name}")
    return bad


def objective_value(m: MilpModel | LpProblem, values: dict[str, float]) -> float:
    return sum(c * values.get(n, 0.0) for n, c in m.objective.items())
