"""Block-diagonal SDP container, the weighted theta-prime program and SDPA I/O.

Coefficient convention (same as SDPA): a term ``(block, i, j, a)`` with
``i < j`` is the symmetric matrix entry a at (i, j) and (j, i), so it
contributes ``2 a X[i, j]`` to the inner product. Only ``i <= j`` is stored.

Coefficients and right-hand sides may be ints, Fractions, floats,
:class:`~packbounds.numerics.PiSum` values or tight
:class:`~packbounds.numerics.RationalInterval` enclosures; numeric back ends
convert them through :func:`coef_fraction`.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from decimal import Context, Decimal
from fractions import Fraction
from typing import Iterable, Sequence, TextIO

import gmpy2
import numpy as np

from .numerics import PiSum, RationalInterval, ScaledRational, as_fraction, enclose, sqrt_enclosure

__all__ = [
    "Block",
    "Constraint",
    "SdpProblem",
    "SdpSolution",
    "StandardForm",
    "WeightedGraph",
    "coef_fraction",
    "to_standard_form",
    "theta_prime_sdp",
    "alpha_bruteforce",
    "export_sdpa",
    "import_sdpa",
    "import_solution",
    "evaluate_solution",
    "SdpaParseError",
]

PSD, DIAG = "psd", "diag"


def coef_fraction(c, bits: int = 600) -> Fraction:
    """Rational value (exact, or the midpoint of a tight enclosure) of a coefficient."""
    if isinstance(c, (int, Fraction)):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    if isinstance(c, RationalInterval):
        return c.mid()
    if isinstance(c, (PiSum, ScaledRational)):
        return enclose(c, bits).mid()
    return as_fraction(c)


def _is_zero(c) -> bool:
    if isinstance(c, RationalInterval):
        return c.lo == 0 and c.hi == 0
    if isinstance(c, PiSum):
        return c.is_zero()
    return c == 0


@dataclass(frozen=True)
class Block:
    name: str
    size: int
    kind: str = PSD

    def __post_init__(self):
        if self.kind not in (PSD, DIAG):
            raise ValueError(f"unknown block kind {self.kind}")
        if self.size < 1:
            raise ValueError("block size must be positive")


@dataclass
class Constraint:
    sense: str  # "=", "<=", ">="
    rhs: object
    terms: list  # [(block, i, j, coef)], i <= j
    label: str = ""


def _merge_terms(terms: Iterable, blocks: Sequence[Block]) -> list:
    acc: dict = {}
    for b, i, j, a in terms:
        if i > j:
            i, j = j, i
        blk = blocks[b]
        if not (0 <= i < blk.size and 0 <= j < blk.size):
            raise IndexError(f"entry ({i},{j}) outside block {blk.name} of size {blk.size}")
        if blk.kind == DIAG and i != j:
            raise IndexError(f"off-diagonal entry in diagonal block {blk.name}")
        key = (b, i, j)
        acc[key] = a if key not in acc else acc[key] + a
    return [(b, i, j, a) for (b, i, j), a in sorted(acc.items()) if not _is_zero(a)]


class SdpProblem:
    """Block-diagonal SDP: optimize a linear functional over PSD/diag blocks."""

    def __init__(self, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError("sense must be min or max")
        self.sense = sense
        self.blocks: list[Block] = []
        self.constraints: list[Constraint] = []
        self.objective: list = []
        self.meta: dict = {}
        self._names: dict[str, int] = {}

    def add_block(self, name: str, size: int, kind: str = PSD) -> int:
        if name in self._names:
            raise ValueError(f"duplicate block name {name}")
        self.blocks.append(Block(name, size, kind))
        self._names[name] = len(self.blocks) - 1
        return len(self.blocks) - 1

    def block_index(self, name: str) -> int:
        return self._names[name]

    def add_constraint(self, sense: str, rhs, terms: Iterable, label: str = "") -> int:
        if sense not in ("=", "<=", ">="):
            raise ValueError(f"unknown constraint sense {sense}")
        self.constraints.append(Constraint(sense, rhs, _merge_terms(terms, self.blocks), label))
        return len(self.constraints) - 1

    def set_objective(self, terms: Iterable):
        self.objective = _merge_terms(terms, self.blocks)

    def __repr__(self):
        sizes = ",".join(f"{b.name}:{b.size}{'d' if b.kind == DIAG else ''}" for b in self.blocks)
        return f"SdpProblem({self.sense}, blocks=[{sizes}], constraints={len(self.constraints)})"


@dataclass
class StandardForm:
    """min <C, X> s.t. <A_k, X> = b_k, X in the product of PSD/diag cones."""

    blocks: list
    A: list  # per constraint: list of (block, i, j, coef)
    b: list
    C: list
    sign: int  # +1 if the source problem minimizes, -1 if it maximizes
    n_original_blocks: int
    slack_of: dict  # constraint index -> slack position in the slack block

    @property
    def m(self) -> int:
        return len(self.A)


def to_standard_form(p: SdpProblem) -> StandardForm:
    """Convert inequalities to equalities with one nonnegative diagonal slack block."""
    if not p.constraints:
        raise ValueError("problem has no constraints")
    blocks = list(p.blocks)
    ineq = [k for k, c in enumerate(p.constraints) if c.sense != "="]
    slack_of = {k: pos for pos, k in enumerate(ineq)}
    if ineq:
        name = "slack"
        while name in {b.name for b in blocks}:
            name = "_" + name
        blocks.append(Block(name, len(ineq), DIAG))
    sb = len(p.blocks)
    A, b = [], []
    for k, c in enumerate(p.constraints):
        terms = list(c.terms)
        if c.sense != "=":
            pos = slack_of[k]
            terms.append((sb, pos, pos, Fraction(-1 if c.sense == ">=" else 1)))
        A.append(terms)
        b.append(c.rhs)
    sign = 1 if p.sense == "min" else -1
    C = [(bk, i, j, a if sign == 1 else -a) for bk, i, j, a in p.objective]
    return StandardForm(blocks, A, b, C, sign, len(p.blocks), slack_of)


@dataclass
class SdpSolution:
    """Primal block matrices (standard-form blocks, slack block last) and reports."""

    matrices: list
    objective: object
    status: str
    max_violation: float = float("nan")
    min_eigenvalues: list = field(default_factory=list)
    dual: object = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("optimal", "feasible", "infeasible", "failed"):
            raise ValueError(f"unknown status {self.status}")

    def block(self, p: SdpProblem, name: str):
        return self.matrices[p.block_index(name)]


def _entry_sum(terms, mats, conv):
    tot = 0
    for b, i, j, a in terms:
        v = conv(a) * mats[b][i, j]
        tot = tot + (v if i == j else 2 * v)
    return tot


def evaluate_solution(p: SdpProblem, matrices: Sequence, conv=None) -> tuple:
    """(objective, max equality violation, per-block min eigenvalue) of a primal point.

    Works with float or high-precision object matrices; violations and
    eigenvalues are reported as floats.
    """
    sf = to_standard_form(p)
    if len(matrices) != len(sf.blocks):
        raise ValueError(f"expected {len(sf.blocks)} blocks, got {len(matrices)}")
    for blk, M in zip(sf.blocks, matrices):
        if M.shape != (blk.size, blk.size):
            raise ValueError(f"block {blk.name}: shape {M.shape} != {blk.size}")
    sample = matrices[0].flat[0]
    if type(sample).__name__ == "mpfr":
        # evaluate at the precision the entries carry
        with gmpy2.context(gmpy2.get_context(), precision=max(sample.precision, gmpy2.get_context().precision)):
            return _evaluate(p, sf, matrices, conv or (lambda a: gmpy2.mpfr(gmpy2.mpq(*_ratio(coef_fraction(a))))))
    if conv is None:
        if isinstance(sample, (float, np.floating)):
            conv = lambda a: float(coef_fraction(a))
        else:
            t = type(sample)
            conv = lambda a: t(coef_fraction(a))
    return _evaluate(p, sf, matrices, conv)


def _ratio(x: Fraction) -> tuple:
    return x.numerator, x.denominator


def _evaluate(p, sf, matrices, conv) -> tuple:
    viol = 0.0
    for terms, rhs in zip(sf.A, sf.b):
        r = _entry_sum(terms, matrices, conv) - conv(rhs)
        viol = max(viol, abs(float(r)))
    obj = _entry_sum(sf.C, matrices, conv)
    if sf.sign < 0:
        obj = -obj
    eigs = []
    for blk, M in zip(sf.blocks, matrices):
        Mf = np.array(M, dtype=float)
        eigs.append(float(np.min(np.diag(Mf))) if blk.kind == DIAG else float(np.linalg.eigvalsh(Mf)[0]))
    return obj, viol, eigs


# ---------------------------------------------------------------------------
# Weighted graphs and theta prime
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: frozenset
    weights: tuple

    def __init__(self, n: int, edges: Iterable, weights: Sequence | None = None):
        es = set()
        for u, v in edges:
            if u == v:
                raise ValueError("self-loops are not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            es.add((min(u, v), max(u, v)))
        ws = tuple(as_fraction(w) for w in (weights if weights is not None else [1] * n))
        if len(ws) != n:
            raise ValueError("need one weight per vertex")
        if any(w < 0 for w in ws):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", frozenset(es))
        object.__setattr__(self, "weights", ws)

    def adjacent(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edges

    @classmethod
    def cycle(cls, n: int, weights=None) -> "WeightedGraph":
        return cls(n, [(i, (i + 1) % n) for i in range(n)], weights)

    @classmethod
    def complete(cls, n: int, weights=None) -> "WeightedGraph":
        return cls(n, itertools.combinations(range(n), 2), weights)


def _sqrt_coef(x: Fraction, bits: int = 600):
    num, den = x.numerator, x.denominator
    rn, rd = int(num**0.5), int(den**0.5)
    for a in (rn - 1, rn, rn + 1):
        for c in (rd - 1, rd, rd + 1):
            if a >= 0 and c > 0 and a * a == num and c * c == den:
                return Fraction(a, c)
    return sqrt_enclosure(x, bits)


def theta_prime_sdp(g: WeightedGraph) -> SdpProblem:
    """min M s.t. K - sqrt(w) sqrt(w)^T PSD, K(x,x) <= M, K(x,y) <= 0 off edges.

    The PSD block G stores K - sqrt(w) sqrt(w)^T, so K(x,y) = G(x,y) + sqrt(w_x w_y).
    """
    p = SdpProblem("min")
    G = p.add_block("G", g.n, PSD)
    M = p.add_block("M", 1, DIAG)
    for x in range(g.n):
        p.add_constraint("<=", -g.weights[x], [(G, x, x, Fraction(1)), (M, 0, 0, Fraction(-1))], f"diag{x}")
    for x, y in itertools.combinations(range(g.n), 2):
        if not g.adjacent(x, y):
            rhs = -_sqrt_coef(g.weights[x] * g.weights[y])
            p.add_constraint("<=", rhs, [(G, x, y, Fraction(1, 2))], f"off{x},{y}")
    if not p.constraints:
        raise ValueError("graph gives no constraints")
    p.set_objective([(M, 0, 0, Fraction(1))])
    p.meta = {"kind": "theta", "n": g.n}
    return p


def alpha_bruteforce(g: WeightedGraph) -> Fraction:
    """Maximum weight of an independent set, by branch and bound."""
    if g.n > 25:
        raise ValueError("alpha_bruteforce supports at most 25 vertices")
    nbr = [0] * g.n
    for u, v in g.edges:
        nbr[u] |= 1 << v
        nbr[v] |= 1 << u
    order = sorted(range(g.n), key=lambda v: -g.weights[v])
    suffix = [Fraction(0)] * (g.n + 1)
    for k in range(g.n - 1, -1, -1):
        suffix[k] = suffix[k + 1] + g.weights[order[k]]
    best = Fraction(0)

    def rec(k: int, banned: int, val: Fraction):
        nonlocal best
        if val > best:
            best = val
        if k == g.n or val + suffix[k] <= best:
            return
        v = order[k]
        if not (banned >> v) & 1:
            rec(k + 1, banned | nbr[v], val + g.weights[v])
        rec(k + 1, banned, val)

    rec(0, 0, Fraction(0))
    return best


# ---------------------------------------------------------------------------
# SDPA sparse format
# ---------------------------------------------------------------------------

_CTX30 = Context(prec=30)


def _fmt(x: Fraction) -> str:
    if x == 0:
        return "0.00000000000000000000000000000e+00"
    d = _CTX30.divide(Decimal(x.numerator), Decimal(x.denominator))
    return f"{d:.29e}"


def export_sdpa(p: SdpProblem, writer: TextIO) -> None:
    """Write the problem in SDPA sparse format (.dat-s).

    Our primal X is the SDPA dual matrix Y: F_k = A_k, c = b, F_0 = -C, so the
    SDPA dual maximizes <F_0, Y> = -<C, X>.
    """
    sf = to_standard_form(p)
    lines = [str(sf.m), str(len(sf.blocks))]
    lines.append(" ".join(str(-b.size if b.kind == DIAG else b.size) for b in sf.blocks))
    lines.append(" ".join(_fmt(coef_fraction(r)) for r in sf.b))
    entries = []
    for b, i, j, a in sf.C:
        entries.append((0, b + 1, i + 1, j + 1, -coef_fraction(a)))
    for k, terms in enumerate(sf.A):
        for b, i, j, a in terms:
            entries.append((k + 1, b + 1, i + 1, j + 1, coef_fraction(a)))
    entries.sort(key=lambda e: e[:4])
    for mat, blk, i, j, v in entries:
        if v != 0:
            lines.append(f"{mat} {blk} {i} {j} {_fmt(v)}")
    writer.write("\n".join(lines) + "\n")


class SdpaParseError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _num(tok: str, line: int) -> Fraction:
    try:
        return Fraction(Decimal(tok.replace("D", "e").replace("d", "e")))
    except Exception as exc:  # noqa: BLE001 - report any malformed number with its line
        raise SdpaParseError(line, f"bad number {tok!r}") from exc


def import_sdpa(reader: TextIO) -> SdpProblem:
    """Read a .dat-s file back as an all-equality minimization problem."""
    raw = reader.read().splitlines()
    body = [(k + 1, ln) for k, ln in enumerate(raw) if ln.strip() and ln.strip()[0] not in "\"*"]
    if len(body) < 4:
        raise SdpaParseError(len(raw) + 1, "file ends before the header is complete")

    def ints(item, what):
        ln, text = item
        toks = [t for t in re.split(r"[\s,{}()]+", text) if t]
        try:
            return [int(t) for t in toks]
        except ValueError as exc:
            raise SdpaParseError(ln, f"bad {what}") from exc

    m = ints(body[0], "mDIM")[0]
    nb = ints(body[1], "nBLOCK")[0]
    sizes = ints(body[2], "block sizes")
    if len(sizes) != nb:
        raise SdpaParseError(body[2][0], f"expected {nb} block sizes, got {len(sizes)}")
    ln, text = body[3]
    rhs = [_num(t, ln) for t in re.split(r"[\s,{}()]+", text) if t]
    if len(rhs) != m:
        raise SdpaParseError(ln, f"expected {m} right-hand sides, got {len(rhs)}")
    p = SdpProblem("min")
    for k, s in enumerate(sizes):
        p.add_block(f"block{k + 1}", abs(s), DIAG if s < 0 else PSD)
    terms: list[list] = [[] for _ in range(m + 1)]
    for ln, text in body[4:]:
        toks = text.split()
        if len(toks) != 5:
            raise SdpaParseError(ln, "expected 'matno blkno i j value'")
        try:
            mat, blk, i, j = (int(t) for t in toks[:4])
        except ValueError as exc:
            raise SdpaParseError(ln, "bad index") from exc
        if not (0 <= mat <= m and 1 <= blk <= nb):
            raise SdpaParseError(ln, "matrix or block number out of range")
        size = abs(sizes[blk - 1])
        if not (1 <= i <= size and 1 <= j <= size):
            raise SdpaParseError(ln, "entry index out of range")
        terms[mat].append((blk - 1, i - 1, j - 1, _num(toks[4], ln)))
    for k in range(m):
        p.add_constraint("=", rhs[k], terms[k + 1])
    p.set_objective([(b, i, j, -a) for b, i, j, a in terms[0]])
    return p


_PHASES = {"pdOPT": "optimal", "pFEAS": "feasible", "pdFEAS": "feasible", "pINF_dFEAS": "infeasible",
           "pINF": "infeasible", "dUNBD": "infeasible"}


def import_solution(reader: TextIO, p: SdpProblem, precision: int = 53) -> SdpSolution:
    """Parse the primal matrices (SDPA ``yMat``) of an SDPA-family output file.

    With precision > 53 the entries are kept as gmpy2 mpfr values of that
    precision (for output of multiple-precision solvers).
    """
    text = reader.read()
    lines = text.splitlines()
    status = "failed"
    for ln in lines:
        mt = re.match(r"\s*phase\.value\s*=\s*(\S+)", ln)
        if mt:
            status = _PHASES.get(mt.group(1), "failed")
    start = next((k for k, ln in enumerate(lines) if re.match(r"\s*yMat\s*=", ln)), None)
    if start is None:
        raise SdpaParseError(len(lines) + 1, "no yMat section found")
    # tokenize braces and numbers after the marker, remembering line numbers
    toks = []
    first = lines[start].split("=", 1)[1]
    for k, ln in enumerate([first] + lines[start + 1:]):
        for t in re.findall(r"[{}]|[^\s{},]+", ln):
            toks.append((start + 1 + k, t))
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(toks):
            raise SdpaParseError(toks[-1][0] if toks else start + 1, "unexpected end of file in yMat")
        ln, t = toks[pos]
        if t == "{":
            pos += 1
            items = []
            while True:
                if pos >= len(toks):
                    raise SdpaParseError(ln, "unterminated '{' in yMat")
                if toks[pos][1] == "}":
                    pos += 1
                    return items
                items.append(parse())
        if t == "}":
            raise SdpaParseError(ln, "unexpected '}'")
        pos += 1
        return (ln, _num(t, ln))

    tree = parse()
    if precision > 53:
        conv = lambda v: gmpy2.mpfr(gmpy2.mpq(v.numerator, v.denominator), precision)
        zeros = lambda n: np.array([[conv(Fraction(0))] * n for _ in range(n)], dtype=object)
    else:
        conv = float
        zeros = lambda n: np.zeros((n, n))
    sf = to_standard_form(p)
    if len(tree) != len(sf.blocks):
        raise SdpaParseError(start + 1, f"yMat has {len(tree)} blocks, problem has {len(sf.blocks)}")
    mats = []
    for blk, node in zip(sf.blocks, tree):
        if blk.kind == DIAG:
            vals = [v for _, v in node] if node and isinstance(node[0], tuple) else None
            if vals is None or len(vals) != blk.size:
                raise SdpaParseError(start + 1, f"diagonal block {blk.name} has wrong shape")
            M = zeros(blk.size)
            for i, v in enumerate(vals):
                M[i, i] = conv(v)
        else:
            if len(node) != blk.size or any(not isinstance(r, list) or len(r) != blk.size for r in node):
                raise SdpaParseError(start + 1, f"block {blk.name} has wrong shape")
            vals = [[v for _, v in r] for r in node]
            M = zeros(blk.size)
            for i in range(blk.size):
                for j in range(blk.size):
                    M[i, j] = conv((vals[i][j] + vals[j][i]) / 2)
        mats.append(M)
    obj, viol, eigs = evaluate_solution(p, mats)
    return SdpSolution(mats, obj, status, viol, eigs, info={"source": "sdpa"})


def write_sdpa_solution(writer: TextIO, p: SdpProblem, sol: SdpSolution, digits: int = 40) -> None:
    """Write a solution in the subset of the SDPA output format read by import_solution."""
    import mpmath

    phase = {"optimal": "pdOPT", "feasible": "pdFEAS", "infeasible": "pINF", "failed": "noINFO"}[sol.status]
    sf = to_standard_form(p)

    def f(x):
        with mpmath.workdps(digits + 5):
            v = x if isinstance(x, float) else mpmath.mpf(str(x))
            return mpmath.nstr(v, digits, min_fixed=1, max_fixed=0)

    out = [f"phase.value = {phase}", f"objValPrimal = {f(sol.objective)}", "yMat = ", "{"]
    for blk, M in zip(sf.blocks, sol.matrices):
        if blk.kind == DIAG:
            out.append("{" + ", ".join(f(M[i, i]) for i in range(blk.size)) + " }")
        else:
            rows = ["{" + ", ".join(f(M[i, j]) for j in range(blk.size)) + " }" for i in range(blk.size)]
            out.append("{ " + ", ".join(rows) + " }")
    out.append("}")
    writer.write("\n".join(out) + "\n")
