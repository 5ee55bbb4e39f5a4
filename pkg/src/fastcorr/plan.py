"""Shift-add multiplication plans for constant template matrices.

A plan is a straight-line DAG of scalar operations whose ``Output`` nodes
compute the scaled-integer correlations ``sum_i n[k][i] * x[i]``.  Node ids are
list positions and every child id is smaller than its parent's, so a plan is
acyclic by construction and can be evaluated in one forward sweep.

Synthesis proceeds in four steps:

1. one product node per distinct nonzero magnitude in each column
   (magnitude 1 is wired straight through);
2. a balanced sum tree per row, columns taken left to right;
3. repeated :func:`cse_pass` until nothing changes (or the pass budget runs out);
4. :func:`prune`.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Optional, Union

from .cost import CostPolicy, CostTally
from .errors import InputError
from .quantize import QuantizedMatrix

PLAN_FORMAT = "fastcorr-plan/1"


@dataclass(frozen=True)
class Input:
    position: int


@dataclass(frozen=True)
class MulCoeff:
    child: int
    magnitude: int


@dataclass(frozen=True)
class Shift:
    child: int
    power: int


@dataclass(frozen=True)
class Add:
    left: int
    right: int
    sign: int = 1  # applied to right: left + sign * right


@dataclass(frozen=True)
class Output:
    child: Optional[int]  # None means the constant zero row
    template: int
    negate: bool = False


PlanNode = Union[Input, MulCoeff, Shift, Add, Output]


def children(node: PlanNode) -> tuple[int, ...]:
    if isinstance(node, (MulCoeff, Shift)):
        return (node.child,)
    if isinstance(node, Add):
        return (node.left, node.right)
    if isinstance(node, Output):
        return () if node.child is None else (node.child,)
    return ()


def _remap(node: PlanNode, f) -> PlanNode:
    if isinstance(node, MulCoeff):
        return MulCoeff(f(node.child), node.magnitude)
    if isinstance(node, Shift):
        return Shift(f(node.child), node.power)
    if isinstance(node, Add):
        return Add(f(node.left), f(node.right), node.sign)
    if isinstance(node, Output):
        return Output(None if node.child is None else f(node.child), node.template, node.negate)
    return node


@dataclass(frozen=True)
class MultiplicationPlan:
    nodes: tuple[PlanNode, ...]
    K: int
    m: int
    base: int = 10
    digits: int = 0
    # powers of ``base`` common to every entry, factored out of the coefficients
    trim: int = 0

    def __post_init__(self):
        validate(self)

    @cached_property
    def cost(self) -> CostTally:
        return plan_cost(self)

    @property
    def scale(self) -> Fraction:
        return Fraction(1, self.base ** (self.digits - self.trim))

    def outputs(self) -> list[Output]:
        outs = [n for n in self.nodes if isinstance(n, Output)]
        return sorted(outs, key=lambda o: o.template)

    def fanout(self) -> list[int]:
        counts = [0] * len(self.nodes)
        for node in self.nodes:
            for c in children(node):
                counts[c] += 1
        return counts


def validate(plan: MultiplicationPlan) -> None:
    if plan.K < 1 or plan.m < 1:
        raise InputError(f"plan dimensions must be positive (K={plan.K}, m={plan.m})")
    if not 0 <= plan.trim <= plan.digits:
        raise InputError(f"trim must lie in [0, D={plan.digits}], got {plan.trim}")
    seen_templates = []
    for idx, node in enumerate(plan.nodes):
        for c in children(node):
            if not 0 <= c < idx:
                raise InputError(f"node {idx} references child {c}; children must precede parents")
            if isinstance(plan.nodes[c], Output):
                raise InputError(f"node {idx} uses output node {c} as an operand")
        if isinstance(node, Input) and not 0 <= node.position < plan.m:
            raise InputError(f"node {idx}: input position {node.position} outside [0, {plan.m})")
        if isinstance(node, MulCoeff) and node.magnitude <= 0:
            raise InputError(f"node {idx}: magnitude must be positive, got {node.magnitude}")
        if isinstance(node, Shift) and node.power < 0:
            raise InputError(f"node {idx}: shift power must be >= 0, got {node.power}")
        if isinstance(node, Add) and node.sign not in (1, -1):
            raise InputError(f"node {idx}: add sign must be +1 or -1")
        if isinstance(node, Output):
            seen_templates.append(node.template)
    if sorted(seen_templates) != list(range(plan.K)):
        raise InputError(f"plan must have exactly one output per template 0..{plan.K - 1}")


class _Builder:
    """Append-only node list with optional hash-consing."""

    def __init__(self, dedupe: bool = True):
        self.nodes: list[PlanNode] = []
        self._index: dict[PlanNode, int] = {}
        self.dedupe = dedupe

    def add(self, node: PlanNode) -> int:
        if self.dedupe and node in self._index:
            return self._index[node]
        self.nodes.append(node)
        self._index.setdefault(node, len(self.nodes) - 1)
        return len(self.nodes) - 1

    def sum_tree(self, terms: list[tuple[int, int]]) -> Optional[tuple[int, int]]:
        """Pairwise-balanced sum of signed terms; returns (outer sign, node id)."""
        if not terms:
            return None
        level = list(terms)
        while len(level) > 1:
            nxt = []
            for j in range(0, len(level) - 1, 2):
                (sa, a), (sb, b) = level[j], level[j + 1]
                nxt.append((sa, self.add(Add(a, b, sa * sb))))
            if len(level) % 2:
                nxt.append(level[-1])
            level = nxt
        return level[0]

    def chain_sum(self, terms: list[tuple[int, int]]) -> Optional[tuple[int, int]]:
        """Left-to-right accumulation, the shape a direct dot product has."""
        if not terms:
            return None
        sa, acc = terms[0]
        for sb, b in terms[1:]:
            acc = self.add(Add(acc, b, sa * sb))
        return sa, acc


def _product_node(b: _Builder, x: int, magnitude: int, base: int) -> int:
    if magnitude == 1:
        return x
    if base != 2:
        return b.add(MulCoeff(x, magnitude))
    # base 2: one shifted copy of x per set bit
    planes = [p for p in range(magnitude.bit_length()) if magnitude >> p & 1]
    terms = [(1, x if p == 0 else b.add(Shift(x, p))) for p in planes]
    return b.sum_tree(terms)[1]


def _finish(b: _Builder, rows: list[list[tuple[int, int]]], tree) -> None:
    for k, terms in enumerate(rows):
        top = tree(terms)
        if top is None:
            b.add(Output(None, k))
        else:
            sign, node = top
            b.add(Output(node, k, sign < 0))


def common_trim(matrix: QuantizedMatrix) -> int:
    """Largest t <= D such that base**t divides every entry."""
    t = 0
    nonzero = [v for row in matrix.ints for v in row if v]
    if not nonzero:
        return 0
    while t < matrix.digits and all(v % matrix.base ** (t + 1) == 0 for v in nonzero):
        t += 1
    return t


def _initial_plan(matrix: QuantizedMatrix) -> MultiplicationPlan:
    trim = common_trim(matrix)
    div = matrix.base**trim
    ints = [[v // div for v in row] for row in matrix.ints]
    b = _Builder()
    inputs = [b.add(Input(i)) for i in range(matrix.m)]
    products = {}
    for i in range(matrix.m):
        for mag in sorted({abs(row[i]) for row in ints if row[i]}):
            products[i, mag] = _product_node(b, inputs[i], mag, matrix.base)
    rows = [
        [(1 if v > 0 else -1, products[i, abs(v)]) for i, v in enumerate(row) if v]
        for row in ints
    ]
    _finish(b, rows, b.sum_tree)
    return MultiplicationPlan(tuple(b.nodes), matrix.K, matrix.m, matrix.base, matrix.digits, trim)


def naive_plan(matrix: QuantizedMatrix) -> MultiplicationPlan:
    """Row-by-row dot products with no sharing: the direct method as a plan.

    Each nonzero entry gets its own ``MulCoeff`` (magnitude-1 entries included,
    though :func:`plan_cost` does not count them), accumulated left to right.
    """
    b = _Builder(dedupe=False)
    inputs = [b.add(Input(i)) for i in range(matrix.m)]
    rows = []
    for row in matrix.ints:
        rows.append(
            [(1 if v > 0 else -1, b.add(MulCoeff(inputs[i], abs(v)))) for i, v in enumerate(row) if v]
        )
    _finish(b, rows, b.chain_sum)
    return MultiplicationPlan(tuple(b.nodes), matrix.K, matrix.m, matrix.base, matrix.digits)


def linear_forms(plan: MultiplicationPlan) -> list[dict[int, Fraction]]:
    """For each node, the map input position -> coefficient it computes (zeros dropped)."""
    forms: list[dict[int, Fraction]] = []
    base = Fraction(plan.base)
    for node in plan.nodes:
        if isinstance(node, Input):
            f = {node.position: Fraction(1)}
        elif isinstance(node, MulCoeff):
            f = {p: c * node.magnitude for p, c in forms[node.child].items()}
        elif isinstance(node, Shift):
            s = base**node.power
            f = {p: c * s for p, c in forms[node.child].items()}
        elif isinstance(node, Add):
            f = dict(forms[node.left])
            for p, c in forms[node.right].items():
                v = f.get(p, 0) + node.sign * c
                if v:
                    f[p] = v
                else:
                    f.pop(p, None)
        else:
            if node.child is None:
                f = {}
            else:
                s = -1 if node.negate else 1
                f = {p: s * c for p, c in forms[node.child].items()}
        forms.append(f)
    return forms


def form_key(form: dict[int, Fraction]) -> tuple:
    return tuple(sorted(form.items()))


def plan_matrix(plan: MultiplicationPlan) -> QuantizedMatrix:
    """Recover the scaled-integer template matrix a plan computes."""
    forms = linear_forms(plan)
    mult = plan.base**plan.trim
    rows = [[0] * plan.m for _ in range(plan.K)]
    for idx, node in enumerate(plan.nodes):
        if isinstance(node, Output):
            for p, c in forms[idx].items():
                if c.denominator != 1:
                    raise InputError(f"output {node.template} has a non-integer coefficient {c}")
                rows[node.template][p] = int(c) * mult
    return QuantizedMatrix.from_scaled(rows, plan.digits, plan.base)


def plan_cost(plan: MultiplicationPlan, policy: CostPolicy = CostPolicy()) -> CostTally:
    mults = sum(1 for n in plan.nodes if isinstance(n, MulCoeff) and n.magnitude != 1)
    adds = sum(1 for n in plan.nodes if isinstance(n, Add))
    shifts = sum(1 for n in plan.nodes if isinstance(n, Shift))
    if policy.count_shifts_as_multiplies:
        return CostTally(mults + shifts, adds, 0)
    return CostTally(mults, adds, shifts)


def _copy_into(b: _Builder, nodes, mapping: dict[int, int], idx: int) -> int:
    if idx in mapping:
        return mapping[idx]
    stack = [idx]
    while stack:
        top = stack[-1]
        pending = [c for c in children(nodes[top]) if c not in mapping]
        if pending:
            stack.extend(pending)
            continue
        stack.pop()
        if top not in mapping:
            mapping[top] = b.add(_remap(nodes[top], mapping.__getitem__))
    return mapping[idx]


def _rebuild(plan: MultiplicationPlan, redirect: dict[int, int] | None = None,
             rows: list[list[tuple[int, int]]] | None = None,
             order_key=None) -> MultiplicationPlan:
    """Copy the reachable part of ``plan`` into a fresh dense node list.

    ``redirect`` replaces references to a node by an equivalent earlier node.
    ``rows``, when given, replaces each output's sum tree with a balanced tree
    over the listed signed atoms (old ids), sorted by ``order_key``.
    """
    redirect = redirect or {}
    nodes = plan.nodes
    if redirect:
        nodes = tuple(_remap(n, lambda c: redirect.get(c, c)) for n in nodes)
    b = _Builder()
    mapping: dict[int, int] = {}
    for idx, node in enumerate(nodes):
        if isinstance(node, Input):
            mapping[idx] = b.add(node)
    outs = sorted((i for i, n in enumerate(nodes) if isinstance(n, Output)),
                  key=lambda i: nodes[i].template)
    if rows is None:
        for i in outs:
            _copy_into(b, nodes, mapping, i)
    else:
        for i in outs:
            ordered = sorted(rows[nodes[i].template], key=lambda t: order_key(t[1]))
            terms = [(s, _copy_into(b, nodes, mapping, a)) for s, a in ordered]
            top = b.sum_tree(terms)
            if top is None:
                b.add(Output(None, nodes[i].template))
            else:
                b.add(Output(top[1], nodes[i].template, top[0] < 0))
    return prune(replace(plan, nodes=tuple(b.nodes)))


def prune(plan: MultiplicationPlan) -> MultiplicationPlan:
    """Drop nodes no output depends on and renumber the rest densely."""
    live = [False] * len(plan.nodes)
    for idx in range(len(plan.nodes) - 1, -1, -1):
        node = plan.nodes[idx]
        if isinstance(node, Output):
            live[idx] = True
        if live[idx]:
            for c in children(node):
                live[c] = True
    new_id = {}
    kept = []
    for idx, node in enumerate(plan.nodes):
        if live[idx]:
            new_id[idx] = len(kept)
            kept.append(_remap(node, new_id.__getitem__))
    if len(kept) == len(plan.nodes):
        return plan
    return replace(plan, nodes=tuple(kept))


def _equivalence_redirects(plan: MultiplicationPlan) -> dict[int, int]:
    """Map each node to the earliest node computing the same linear form."""
    first: dict[tuple, int] = {}
    redirect = {}
    for idx, form in enumerate(linear_forms(plan)):
        if isinstance(plan.nodes[idx], Output):
            continue
        key = form_key(form)
        if key in first:
            redirect[idx] = first[key]
        else:
            first[key] = idx
    return redirect


def _flatten_rows(plan: MultiplicationPlan) -> list[list[tuple[int, int]]]:
    """Signed atom lists per template; shared (fan-out > 1) adds stay atomic."""
    fan = plan.fanout()
    rows: list[list[tuple[int, int]]] = [[] for _ in range(plan.K)]
    for node in plan.nodes:
        if not isinstance(node, Output) or node.child is None:
            continue
        out = rows[node.template]
        stack = [(-1 if node.negate else 1, node.child)]
        while stack:
            s, idx = stack.pop()
            n = plan.nodes[idx]
            if isinstance(n, Add) and fan[idx] == 1:
                stack.append((s * n.sign, n.right))
                stack.append((s, n.left))
            else:
                out.append((s, idx))
    return rows


def _pair_candidates(rows: list[list[tuple[int, int]]]) -> list[tuple[tuple[int, int, int], int]]:
    counts: Counter = Counter()
    for terms in rows:
        by_id = sorted(terms, key=lambda t: t[1])
        keys = set()
        for a in range(len(by_id)):
            sa, na = by_id[a]
            for b in range(a + 1, len(by_id)):
                sb, nb = by_id[b]
                if na != nb:
                    keys.add((na, nb, sa * sb))
        counts.update(keys)
    cands = [(key, n) for key, n in counts.items() if n >= 2]
    cands.sort(key=lambda kv: (-kv[1], kv[0][0], kv[0][1], -kv[0][2]))
    return cands


def _extract_pair(rows, lo: int, hi: int, rel: int, pair_id: int):
    new_rows = []
    for terms in rows:
        signs = dict((a, s) for s, a in terms)
        if lo in signs and hi in signs and signs[lo] * signs[hi] == rel:
            s_lo = signs[lo]
            rest = list(terms)
            rest.remove((s_lo, lo))
            rest.remove((signs[hi], hi))
            rest.append((s_lo, pair_id))
            new_rows.append(rest)
        else:
            new_rows.append(list(terms))
    return new_rows


def cse_pass(plan: MultiplicationPlan) -> tuple[MultiplicationPlan, bool]:
    """One round of common-subexpression elimination.

    First merges nodes computing identical linear forms (this subsumes exact
    structural duplicates).  If there were none, extracts the most frequent
    signed pair of atoms shared by two or more rows into a single ``Add``.
    A changed plan always has strictly fewer nodes and never more of any kind.
    """
    redirect = _equivalence_redirects(plan)
    if redirect:
        return _rebuild(plan, redirect=redirect), True

    before = plan_cost(plan)
    rows = _flatten_rows(plan)
    forms = linear_forms(plan)
    lead = [min(f) if f else plan.m for f in forms]

    for (lo, hi, rel), _ in _pair_candidates(rows):
        # the new pair node is appended after the existing ones
        pair_id = len(plan.nodes)
        trial_nodes = plan.nodes + (Add(lo, hi, rel),)
        lead_ext = lead + [min(lead[lo], lead[hi])]
        new_rows = _extract_pair(rows, lo, hi, rel, pair_id)
        trial = replace(plan, nodes=trial_nodes)
        out = _rebuild(trial, rows=new_rows, order_key=lambda a: (lead_ext[a], a))
        after = plan_cost(out)
        if after.adds < before.adds and after.multiplies <= before.multiplies and after.shifts <= before.shifts:
            return out, True
    return plan, False


def synthesize_plan(matrix: QuantizedMatrix, policy: CostPolicy = CostPolicy()) -> MultiplicationPlan:
    plan = _initial_plan(matrix)
    for _ in range(policy.cse_max_passes):
        plan, changed = cse_pass(plan)
        if not changed:
            break
    return prune(plan)


# -- serialization -----------------------------------------------------------

def _node_to_dict(idx: int, node: PlanNode) -> dict:
    if isinstance(node, Input):
        return {"id": idx, "kind": "input", "position": node.position}
    if isinstance(node, MulCoeff):
        return {"id": idx, "kind": "mul", "child": node.child, "magnitude": node.magnitude}
    if isinstance(node, Shift):
        return {"id": idx, "kind": "shift", "child": node.child, "power": node.power}
    if isinstance(node, Add):
        return {"id": idx, "kind": "add", "left": node.left, "right": node.right,
                "sign": "+" if node.sign > 0 else "-"}
    return {"id": idx, "kind": "output", "child": node.child, "template": node.template,
            "negate": node.negate}


def _node_from_dict(d: dict) -> PlanNode:
    kind = d.get("kind")
    try:
        if kind == "input":
            return Input(int(d["position"]))
        if kind == "mul":
            return MulCoeff(int(d["child"]), int(d["magnitude"]))
        if kind == "shift":
            return Shift(int(d["child"]), int(d["power"]))
        if kind == "add":
            if d["sign"] not in ("+", "-"):
                raise InputError(f"node {d.get('id')}: bad sign {d['sign']!r}")
            return Add(int(d["left"]), int(d["right"]), 1 if d["sign"] == "+" else -1)
        if kind == "output":
            child = d["child"]
            return Output(None if child is None else int(child), int(d["template"]), bool(d["negate"]))
    except KeyError as exc:
        raise InputError(f"node {d.get('id')}: missing field {exc}") from exc
    raise InputError(f"node {d.get('id')}: unknown kind {kind!r}")


def plan_to_dict(plan: MultiplicationPlan, policy: CostPolicy = CostPolicy()) -> dict:
    return {
        "format": PLAN_FORMAT,
        "base": plan.base,
        "D": plan.digits,
        "K": plan.K,
        "m": plan.m,
        "trim": plan.trim,
        "nodes": [_node_to_dict(i, n) for i, n in enumerate(plan.nodes)],
        "cost": plan_cost(plan, policy).as_dict(),
    }


def plan_to_json(plan: MultiplicationPlan, policy: CostPolicy = CostPolicy()) -> str:
    return json.dumps(plan_to_dict(plan, policy), indent=1) + "\n"


def plan_from_dict(d: dict) -> MultiplicationPlan:
    try:
        raw_nodes = d["nodes"]
        for pos, nd in enumerate(raw_nodes):
            if nd.get("id", pos) != pos:
                raise InputError(f"node ids must be dense and ordered; entry {pos} has id {nd.get('id')}")
        nodes = tuple(_node_from_dict(nd) for nd in raw_nodes)
        return MultiplicationPlan(nodes, int(d["K"]), int(d["m"]), int(d["base"]), int(d["D"]),
                                  int(d.get("trim", 0)))
    except KeyError as exc:
        raise InputError(f"plan is missing field {exc}") from exc


def plan_from_json(text: str) -> MultiplicationPlan:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"plan is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    return plan_from_dict(d)


def build_plan(nodes: Iterable[PlanNode], K: int, m: int, base: int = 10, digits: int = 0,
               trim: int = 0) -> MultiplicationPlan:
    """Assemble a plan from hand-written nodes (validated)."""
    return MultiplicationPlan(tuple(nodes), K, m, base, digits, trim)
